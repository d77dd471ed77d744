//! Simulator and exact energy-aware routing optimizer for AWGR-based PON
//! data-centre fabrics under link failures.
//!
//! The crate models two passive optical fabrics — a single-tier two-AWGR
//! design (`pon3`) and a two-tier cascaded-AWGR design — injects single-link
//! failures of five classes, routes traffic to minimize total power (server
//! plus OLT, solved exactly by branch-and-bound with a brute-force oracle),
//! and reports the resulting power and M/M/1 queuing delay per scenario.
//!
//! Typical flow:
//!
//! ```
//! use ponfab_core::prelude::*;
//!
//! let topology = build_pon3(4);
//! let demands = vec![Demand::new("d0", "srv-0-00", "srv-2-00", 0.5)];
//! let problem = formulate(&topology, demands, RoutingMode::SinglePath, 16).unwrap();
//! let solution = solve(&problem, &SolverConfig::default()).unwrap();
//! assert!(solution.active_olts.is_empty()); // direct path, no relay power
//! ```

pub mod experiment;
pub mod failure;
pub mod metrics;
pub mod optimizer;
pub mod topology;

/// The types and operations most callers need.
pub mod prelude {
    pub use crate::experiment::{
        emit_report, generate_demands, map_demands, render_table, run_sweep, DemandPattern,
        ExperimentSpec, SweepResult,
    };
    pub use crate::failure::{
        apply_failure, classify_link, down_analysis, enumerate_single_failures, DownReport,
        FailureKind, FailureScenario, LinkClass,
    };
    pub use crate::metrics::{
        mm1_delay, olt_power, server_power, solution_delay, total_power, DelayModel, DelayReport,
        DeviceParams, PowerReport,
    };
    pub use crate::optimizer::{
        brute_force, formulate, solve, verify, Demand, DemandId, RoutingMode, RoutingProblem,
        RoutingSolution, SolveStatus, SolverConfig,
    };
    pub use crate::topology::{
        build_pon3, build_two_tier, candidate_paths, load_topology, save_topology, Architecture,
        DeviceKind, Link, LinkDirection, LinkId, Node, NodeId, Topology,
    };
}
