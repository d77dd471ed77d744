//! Energy-aware routing over candidate paths.
//!
//! The objective is total power: the sum of server power over active servers
//! plus OLT power over active OLT switches. Server activation is forced for
//! every demand endpoint and server traffic is fixed by the demand volumes,
//! so routing only decides which paths carry each demand — and with them,
//! how much traffic each OLT forwards. Single-path assignments are solved
//! exactly by branch-and-bound over path indices ([`solve`]) and checked
//! against exhaustive enumeration ([`brute_force`]); splittable assignments
//! refine the single-path optimum by moving relayed volume onto OLT-free
//! residual capacity.

mod search;
mod split;
mod verify;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::topology::{
    candidate_paths, CandidatePath, LinkId, NodeId, Topology, TopologyError,
};

pub use verify::{verify, Violation};

/// Opaque demand identifier.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DemandId(pub String);

impl fmt::Display for DemandId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for DemandId {
    fn from(s: &str) -> Self {
        DemandId(s.to_string())
    }
}

/// One source-server to destination-server traffic volume.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Demand {
    pub id: DemandId,
    pub src: NodeId,
    pub dst: NodeId,
    pub volume_gbps: f64,
}

impl Demand {
    pub fn new(
        id: impl Into<String>,
        src: impl Into<String>,
        dst: impl Into<String>,
        volume_gbps: f64,
    ) -> Self {
        Demand {
            id: DemandId(id.into()),
            src: NodeId(src.into()),
            dst: NodeId(dst.into()),
            volume_gbps,
        }
    }
}

/// Whether a demand sticks to one path or may split across several.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RoutingMode {
    #[default]
    SinglePath,
    Splittable,
}

impl std::str::FromStr for RoutingMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "single-path" | "single_path" | "singlepath" => Ok(RoutingMode::SinglePath),
            "splittable" => Ok(RoutingMode::Splittable),
            other => Err(format!("unknown mode `{other}` (expected single-path or splittable)")),
        }
    }
}

/// Deterministic tie-break applied to equal-objective assignments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TieBreak {
    /// Earlier demands prefer lower path indices (lexicographic order over
    /// the per-demand path-index vector).
    LowestPathIndex,
}

/// Solver knobs. All tolerances are strictly positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Slack allowed on link capacities, in Gbps.
    pub feasibility_tolerance_gbps: f64,
    /// Relative tolerance used when checking a stated objective.
    pub objective_rel_tolerance: f64,
    /// Branch-and-bound node budget.
    pub node_limit: u64,
    pub tie_break: TieBreak,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            feasibility_tolerance_gbps: 1e-9,
            objective_rel_tolerance: 1e-6,
            node_limit: 10_000_000,
            tie_break: TieBreak::LowestPathIndex,
        }
    }
}

/// A routing problem: a (post-failure) topology, demands, and the candidate
/// paths computed for each demand. Demands without any surviving path are
/// listed in `unroutable` and excluded from the search; they force
/// `status = partial` rather than an error.
#[derive(Debug, Clone)]
pub struct RoutingProblem {
    pub topology: Topology,
    pub demands: Vec<Demand>,
    pub mode: RoutingMode,
    pub max_paths: usize,
    pub candidates: BTreeMap<DemandId, Vec<CandidatePath>>,
    pub unroutable: BTreeSet<DemandId>,
    /// Additive per-server processing load hook (Gbps-equivalent); empty by
    /// default, counted into server utilization when present.
    pub processing_gbps: BTreeMap<NodeId, f64>,
}

/// Default candidate-path cap per demand.
pub const DEFAULT_MAX_PATHS: usize = 16;

/// Builds a [`RoutingProblem`] by computing candidate paths for every demand.
pub fn formulate(
    topology: &Topology,
    demands: Vec<Demand>,
    mode: RoutingMode,
    max_paths: usize,
) -> Result<RoutingProblem, OptimizeError> {
    let mut seen = BTreeSet::new();
    for d in &demands {
        if !seen.insert(d.id.clone()) {
            return Err(OptimizeError::DuplicateDemand(d.id.clone()));
        }
        if d.volume_gbps.is_nan() || d.volume_gbps <= 0.0 {
            return Err(OptimizeError::BadVolume { demand: d.id.clone(), volume: d.volume_gbps });
        }
    }
    let mut candidates = BTreeMap::new();
    let mut unroutable = BTreeSet::new();
    for d in &demands {
        let paths = candidate_paths(topology, &d.src, &d.dst, max_paths)?;
        if paths.is_empty() {
            unroutable.insert(d.id.clone());
        }
        candidates.insert(d.id.clone(), paths);
    }
    Ok(RoutingProblem {
        topology: topology.clone(),
        demands,
        mode,
        max_paths,
        candidates,
        unroutable,
        processing_gbps: BTreeMap::new(),
    })
}

/// Solution status.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    /// Some demands had no surviving path; the rest are routed optimally.
    Partial,
    /// The routable demands cannot jointly fit the link capacities.
    Infeasible,
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SolveStatus::Optimal => f.write_str("optimal"),
            SolveStatus::Partial => f.write_str("partial"),
            SolveStatus::Infeasible => f.write_str("infeasible"),
        }
    }
}

/// Volume carried by one candidate path for one demand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathFlow {
    pub path_index: usize,
    pub links: Vec<LinkId>,
    pub nodes: Vec<NodeId>,
    pub olt_relay: bool,
    pub volume_gbps: f64,
}

/// A routing assignment plus everything needed to evaluate it standalone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutingSolution {
    pub status: SolveStatus,
    pub objective_w: f64,
    pub active_servers: BTreeSet<NodeId>,
    pub active_olts: BTreeSet<NodeId>,
    pub unroutable: BTreeSet<DemandId>,
    pub link_loads_gbps: BTreeMap<LinkId, f64>,
    pub olt_forwarded_gbps: BTreeMap<NodeId, f64>,
    pub server_tx_gbps: BTreeMap<NodeId, f64>,
    pub server_rx_gbps: BTreeMap<NodeId, f64>,
    pub server_proc_gbps: BTreeMap<NodeId, f64>,
    pub assignment: BTreeMap<DemandId, Vec<PathFlow>>,
}

impl RoutingSolution {
    /// Total traffic forwarded by all OLT switches.
    pub fn total_olt_forwarded_gbps(&self) -> f64 {
        self.olt_forwarded_gbps.values().fold(0.0, |a, b| a + b)
    }
}

#[derive(Debug, Error)]
pub enum OptimizeError {
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error("duplicate demand id `{0}`")]
    DuplicateDemand(DemandId),
    #[error("demand `{demand}` has non-positive volume {volume} Gbps")]
    BadVolume { demand: DemandId, volume: f64 },
    #[error("instance too large for exhaustive search: {assignments:.3e} assignments (limit {limit:.1e})")]
    TooLarge { assignments: f64, limit: f64 },
    #[error("brute force only supports single-path problems")]
    WrongMode,
    #[error("node limit {0} exhausted before proving optimality")]
    NodeLimit(u64),
    #[error("failed to parse document: {0}")]
    Parse(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// Minimizes total power over the routable demands, subject to flow
/// conservation and link capacities.
///
/// Single-path mode runs an exact branch-and-bound over path indices;
/// splittable mode refines the single-path optimum by splitting relayed
/// volume onto OLT-free residual capacity (falling back to a greedy
/// fractional fill when no single-path assignment exists). Equal-objective
/// ties go to the lexicographically smallest path-index vector.
pub fn solve(problem: &RoutingProblem, cfg: &SolverConfig) -> Result<RoutingSolution, OptimizeError> {
    match problem.mode {
        RoutingMode::SinglePath => search::branch_and_bound(problem, cfg),
        RoutingMode::Splittable => split::solve_splittable(problem, cfg),
    }
}

/// Exhaustively enumerates every single-path assignment and returns the
/// minimum under the same tie-break as [`solve`]. This is the verification
/// oracle; it shares no search logic with the branch-and-bound.
pub fn brute_force(problem: &RoutingProblem) -> Result<RoutingSolution, OptimizeError> {
    search::brute_force(problem)
}

// --- demand documents --------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct DemandsDoc {
    #[serde(default)]
    demands: Vec<DemandDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
struct DemandDoc {
    id: String,
    src: String,
    dst: String,
    volume: f64,
}

/// Serializes demands to their TOML document form.
pub fn save_demands_str(demands: &[Demand]) -> String {
    let doc = DemandsDoc {
        demands: demands
            .iter()
            .map(|d| DemandDoc {
                id: d.id.0.clone(),
                src: d.src.0.clone(),
                dst: d.dst.0.clone(),
                volume: d.volume_gbps,
            })
            .collect(),
    };
    toml::to_string_pretty(&doc).expect("demand document serializes")
}

/// Writes a demand document to `path`.
pub fn save_demands(demands: &[Demand], path: &Path) -> Result<(), OptimizeError> {
    std::fs::write(path, save_demands_str(demands))
        .map_err(|source| OptimizeError::Io { path: path.display().to_string(), source })
}

/// Parses a demand document.
pub fn load_demands_str(text: &str) -> Result<Vec<Demand>, OptimizeError> {
    let doc: DemandsDoc = toml::from_str(text).map_err(|e| OptimizeError::Parse(e.to_string()))?;
    Ok(doc
        .demands
        .into_iter()
        .map(|d| Demand::new(d.id, d.src, d.dst, d.volume))
        .collect())
}

/// Reads a demand document from `path`.
pub fn load_demands(path: &Path) -> Result<Vec<Demand>, OptimizeError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| OptimizeError::Io { path: path.display().to_string(), source })?;
    load_demands_str(&text)
}

// --- solution documents -------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct SolutionDoc {
    status: SolveStatus,
    objective_w: f64,
    active_servers: Vec<NodeId>,
    active_olts: Vec<NodeId>,
    unroutable: Vec<DemandId>,
    link_loads: BTreeMap<String, f64>,
    olt_forwarded: BTreeMap<String, f64>,
    server_tx: BTreeMap<String, f64>,
    server_rx: BTreeMap<String, f64>,
    server_proc: BTreeMap<String, f64>,
    #[serde(default)]
    assignments: Vec<AssignmentDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
struct AssignmentDoc {
    demand: String,
    #[serde(default)]
    flows: Vec<PathFlow>,
}

/// Serializes a solution dump, sufficient for [`verify`] to run standalone.
pub fn save_solution_str(s: &RoutingSolution) -> String {
    let doc = SolutionDoc {
        status: s.status,
        objective_w: s.objective_w,
        active_servers: s.active_servers.iter().cloned().collect(),
        active_olts: s.active_olts.iter().cloned().collect(),
        unroutable: s.unroutable.iter().cloned().collect(),
        link_loads: s.link_loads_gbps.iter().map(|(k, v)| (k.0.clone(), *v)).collect(),
        olt_forwarded: s.olt_forwarded_gbps.iter().map(|(k, v)| (k.0.clone(), *v)).collect(),
        server_tx: s.server_tx_gbps.iter().map(|(k, v)| (k.0.clone(), *v)).collect(),
        server_rx: s.server_rx_gbps.iter().map(|(k, v)| (k.0.clone(), *v)).collect(),
        server_proc: s.server_proc_gbps.iter().map(|(k, v)| (k.0.clone(), *v)).collect(),
        assignments: s
            .assignment
            .iter()
            .map(|(id, flows)| AssignmentDoc { demand: id.0.clone(), flows: flows.clone() })
            .collect(),
    };
    toml::to_string_pretty(&doc).expect("solution document serializes")
}

/// Writes a solution dump to `path`.
pub fn save_solution(s: &RoutingSolution, path: &Path) -> Result<(), OptimizeError> {
    std::fs::write(path, save_solution_str(s))
        .map_err(|source| OptimizeError::Io { path: path.display().to_string(), source })
}

/// Parses a solution dump.
pub fn load_solution_str(text: &str) -> Result<RoutingSolution, OptimizeError> {
    let doc: SolutionDoc = toml::from_str(text).map_err(|e| OptimizeError::Parse(e.to_string()))?;
    Ok(RoutingSolution {
        status: doc.status,
        objective_w: doc.objective_w,
        active_servers: doc.active_servers.into_iter().collect(),
        active_olts: doc.active_olts.into_iter().collect(),
        unroutable: doc.unroutable.into_iter().collect(),
        link_loads_gbps: doc.link_loads.into_iter().map(|(k, v)| (LinkId(k), v)).collect(),
        olt_forwarded_gbps: doc.olt_forwarded.into_iter().map(|(k, v)| (NodeId(k), v)).collect(),
        server_tx_gbps: doc.server_tx.into_iter().map(|(k, v)| (NodeId(k), v)).collect(),
        server_rx_gbps: doc.server_rx.into_iter().map(|(k, v)| (NodeId(k), v)).collect(),
        server_proc_gbps: doc.server_proc.into_iter().map(|(k, v)| (NodeId(k), v)).collect(),
        assignment: doc
            .assignments
            .into_iter()
            .map(|a| (DemandId(a.demand), a.flows))
            .collect(),
    })
}

/// Reads a solution dump from `path`.
pub fn load_solution(path: &Path) -> Result<RoutingSolution, OptimizeError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| OptimizeError::Io { path: path.display().to_string(), source })?;
    load_solution_str(&text)
}
