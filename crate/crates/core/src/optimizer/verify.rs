//! Independent re-check of every routing-solution invariant.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::metrics;
use crate::topology::{LinkId, NodeId};

use super::{DemandId, RoutingMode, RoutingProblem, RoutingSolution, SolveStatus, SolverConfig};

/// One violated invariant.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Violation {
    #[error("routable demand `{0}` has no assignment")]
    MissingAssignment(DemandId),
    #[error("demand `{0}` is assigned but is unroutable or unknown")]
    UnexpectedAssignment(DemandId),
    #[error("demand `{demand}` flow {flow} does not match candidate path {path_index}")]
    PathMismatch { demand: DemandId, flow: usize, path_index: usize },
    #[error("demand `{0}` uses {1} paths in single-path mode")]
    ModeViolation(DemandId, usize),
    #[error("demand `{demand}` routes {routed} Gbps of its {volume} Gbps volume")]
    VolumeMismatch { demand: DemandId, routed: f64, volume: f64 },
    #[error("link `{link}` stores load {stored} Gbps but flows sum to {recomputed} Gbps")]
    LinkLoadMismatch { link: LinkId, stored: f64, recomputed: f64 },
    #[error("link `{link}` carries {load} Gbps over its {capacity} Gbps capacity")]
    CapacityExceeded { link: LinkId, load: f64, capacity: f64 },
    #[error("active server set mismatch: {0}")]
    ActiveServersMismatch(String),
    #[error("active OLT set mismatch: {0}")]
    ActiveOltsMismatch(String),
    #[error("OLT `{olt}` stores {stored} Gbps forwarded but flows sum to {recomputed} Gbps")]
    OltForwardedMismatch { olt: NodeId, stored: f64, recomputed: f64 },
    #[error("server `{server}` {direction} load stored {stored} Gbps, recomputed {recomputed} Gbps")]
    ServerLoadMismatch { server: NodeId, direction: &'static str, stored: f64, recomputed: f64 },
    #[error("objective {stated} W does not match recomputed {recomputed} W")]
    ObjectiveMismatch { stated: f64, recomputed: f64 },
    #[error("inconsistent status: {0}")]
    StatusInconsistent(String),
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

/// Re-checks every invariant of `solution` against `problem` from scratch:
/// assignment validity, flow conservation, link capacities, activation
/// coupling, stored load maps and the objective recomputation. An empty list
/// means the solution is valid.
pub fn verify(
    problem: &RoutingProblem,
    solution: &RoutingSolution,
    cfg: &SolverConfig,
) -> Vec<Violation> {
    let mut violations = Vec::new();
    let tol = cfg.feasibility_tolerance_gbps;
    let params = problem.topology.device_params();

    // Status bookkeeping.
    match solution.status {
        SolveStatus::Optimal if !solution.unroutable.is_empty() => violations.push(
            Violation::StatusInconsistent("optimal but unroutable demands are listed".into()),
        ),
        SolveStatus::Partial if solution.unroutable.is_empty() => violations.push(
            Violation::StatusInconsistent("partial without any unroutable demand".into()),
        ),
        SolveStatus::Infeasible if !solution.assignment.is_empty() => violations.push(
            Violation::StatusInconsistent("infeasible yet carries an assignment".into()),
        ),
        _ => {}
    }
    if solution.status == SolveStatus::Infeasible {
        return violations;
    }

    let demand_by_id: BTreeMap<&DemandId, &super::Demand> =
        problem.demands.iter().map(|d| (&d.id, d)).collect();

    // Every routable demand assigned, nothing else.
    for d in &problem.demands {
        let routable = !problem.unroutable.contains(&d.id);
        let assigned = solution.assignment.contains_key(&d.id);
        if routable && !assigned {
            violations.push(Violation::MissingAssignment(d.id.clone()));
        }
    }
    for id in solution.assignment.keys() {
        if !demand_by_id.contains_key(id) || problem.unroutable.contains(id) {
            violations.push(Violation::UnexpectedAssignment(id.clone()));
        }
    }

    // Flow conservation and path validity; rebuild loads as we go.
    let mut link_loads: BTreeMap<LinkId, f64> = BTreeMap::new();
    let mut olt_forwarded: BTreeMap<NodeId, f64> = BTreeMap::new();
    let mut server_tx: BTreeMap<NodeId, f64> = BTreeMap::new();
    let mut server_rx: BTreeMap<NodeId, f64> = BTreeMap::new();
    for (id, flows) in &solution.assignment {
        let Some(demand) = demand_by_id.get(id) else { continue };
        if problem.mode == RoutingMode::SinglePath && flows.len() != 1 {
            violations.push(Violation::ModeViolation(id.clone(), flows.len()));
        }
        let routed: f64 = flows.iter().map(|f| f.volume_gbps).sum();
        if !close(routed, demand.volume_gbps, tol) {
            violations.push(Violation::VolumeMismatch {
                demand: id.clone(),
                routed,
                volume: demand.volume_gbps,
            });
        }
        *server_tx.entry(demand.src.clone()).or_insert(0.0) += demand.volume_gbps;
        *server_rx.entry(demand.dst.clone()).or_insert(0.0) += demand.volume_gbps;
        let candidates = problem.candidates.get(id).map(Vec::as_slice).unwrap_or(&[]);
        for (i, flow) in flows.iter().enumerate() {
            match candidates.get(flow.path_index) {
                Some(path) if path.links == flow.links && path.nodes == flow.nodes => {}
                _ => violations.push(Violation::PathMismatch {
                    demand: id.clone(),
                    flow: i,
                    path_index: flow.path_index,
                }),
            }
            for link in &flow.links {
                *link_loads.entry(link.clone()).or_insert(0.0) += flow.volume_gbps;
            }
            for node in &flow.nodes {
                if problem.topology.node(node).map(|n| n.kind)
                    == Some(crate::topology::DeviceKind::Olt)
                {
                    *olt_forwarded.entry(node.clone()).or_insert(0.0) += flow.volume_gbps;
                }
            }
        }
    }

    // Capacities against the recomputed loads.
    for (link, load) in &link_loads {
        let Some(l) = problem.topology.link(link) else {
            violations.push(Violation::LinkLoadMismatch {
                link: link.clone(),
                stored: 0.0,
                recomputed: *load,
            });
            continue;
        };
        if *load > l.capacity_gbps + tol {
            violations.push(Violation::CapacityExceeded {
                link: link.clone(),
                load: *load,
                capacity: l.capacity_gbps,
            });
        }
    }

    // Stored maps must match the recomputation.
    for (link, recomputed) in &link_loads {
        let stored = solution.link_loads_gbps.get(link).copied().unwrap_or(0.0);
        if !close(stored, *recomputed, tol) {
            violations.push(Violation::LinkLoadMismatch {
                link: link.clone(),
                stored,
                recomputed: *recomputed,
            });
        }
    }
    for (link, stored) in &solution.link_loads_gbps {
        if !link_loads.contains_key(link) && !close(*stored, 0.0, tol) {
            violations.push(Violation::LinkLoadMismatch {
                link: link.clone(),
                stored: *stored,
                recomputed: 0.0,
            });
        }
    }
    for (olt, recomputed) in &olt_forwarded {
        let stored = solution.olt_forwarded_gbps.get(olt).copied().unwrap_or(0.0);
        if !close(stored, *recomputed, tol) {
            violations.push(Violation::OltForwardedMismatch {
                olt: olt.clone(),
                stored,
                recomputed: *recomputed,
            });
        }
    }
    for (server, recomputed) in &server_tx {
        let stored = solution.server_tx_gbps.get(server).copied().unwrap_or(0.0);
        if !close(stored, *recomputed, tol) {
            violations.push(Violation::ServerLoadMismatch {
                server: server.clone(),
                direction: "tx",
                stored,
                recomputed: *recomputed,
            });
        }
    }
    for (server, recomputed) in &server_rx {
        let stored = solution.server_rx_gbps.get(server).copied().unwrap_or(0.0);
        if !close(stored, *recomputed, tol) {
            violations.push(Violation::ServerLoadMismatch {
                server: server.clone(),
                direction: "rx",
                stored,
                recomputed: *recomputed,
            });
        }
    }

    // Activation coupling: servers iff endpoints of routed demands, OLTs iff
    // they forward traffic.
    let expected_servers: BTreeSet<NodeId> =
        server_tx.keys().chain(server_rx.keys()).cloned().collect();
    if expected_servers != solution.active_servers {
        let missing: Vec<String> = expected_servers
            .difference(&solution.active_servers)
            .map(|n| n.0.clone())
            .collect();
        let extra: Vec<String> = solution
            .active_servers
            .difference(&expected_servers)
            .map(|n| n.0.clone())
            .collect();
        violations.push(Violation::ActiveServersMismatch(format!(
            "missing [{}], extra [{}]",
            missing.join(","),
            extra.join(","),
        )));
    }
    let expected_olts: BTreeSet<NodeId> =
        olt_forwarded.iter().filter(|(_, f)| **f > tol).map(|(o, _)| o.clone()).collect();
    if expected_olts != solution.active_olts {
        violations.push(Violation::ActiveOltsMismatch(format!(
            "expected [{}], stated [{}]",
            expected_olts.iter().map(|n| n.0.clone()).collect::<Vec<_>>().join(","),
            solution.active_olts.iter().map(|n| n.0.clone()).collect::<Vec<_>>().join(","),
        )));
    }

    // Objective: rebuild a solution from the recomputed pieces and price it
    // through the metrics module.
    let recomputed = RoutingSolution {
        status: solution.status,
        objective_w: 0.0,
        active_servers: expected_servers,
        active_olts: expected_olts,
        unroutable: solution.unroutable.clone(),
        link_loads_gbps: link_loads,
        olt_forwarded_gbps: olt_forwarded,
        server_tx_gbps: server_tx,
        server_rx_gbps: server_rx,
        server_proc_gbps: solution.server_proc_gbps.clone(),
        assignment: solution.assignment.clone(),
    };
    let recomputed_w = metrics::total_power(&recomputed, params).total_w;
    let rel = cfg.objective_rel_tolerance * recomputed_w.abs().max(1.0);
    if (solution.objective_w - recomputed_w).abs() > rel {
        violations.push(Violation::ObjectiveMismatch {
            stated: solution.objective_w,
            recomputed: recomputed_w,
        });
    }

    violations
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizer::{formulate, solve, Demand, SolverConfig};
    use crate::topology::build_pon3;

    fn solved() -> (RoutingProblem, RoutingSolution) {
        let t = build_pon3(2);
        let p = formulate(
            &t,
            vec![
                Demand::new("d0", "srv-0-00", "srv-2-00", 0.5),
                Demand::new("d1", "srv-1-00", "srv-3-01", 0.3),
            ],
            RoutingMode::SinglePath,
            16,
        )
        .unwrap();
        let s = solve(&p, &SolverConfig::default()).unwrap();
        (p, s)
    }

    #[test]
    fn optimal_solutions_verify_clean() {
        let (p, s) = solved();
        assert_eq!(verify(&p, &s, &SolverConfig::default()), vec![]);
    }

    #[test]
    fn tampered_link_load_is_reported() {
        let (p, mut s) = solved();
        let link = s.link_loads_gbps.keys().next().unwrap().clone();
        *s.link_loads_gbps.get_mut(&link).unwrap() += 1.0;
        let violations = verify(&p, &s, &SolverConfig::default());
        assert!(
            violations.iter().any(|v| matches!(v, Violation::LinkLoadMismatch { .. })),
            "{violations:?}"
        );
    }

    #[test]
    fn perturbed_objective_is_reported() {
        let (p, mut s) = solved();
        s.objective_w += 1.0;
        let violations = verify(&p, &s, &SolverConfig::default());
        assert!(
            violations.iter().any(|v| matches!(v, Violation::ObjectiveMismatch { .. })),
            "{violations:?}"
        );
    }

    #[test]
    fn dropped_assignment_is_reported() {
        let (p, mut s) = solved();
        s.assignment.remove(&"d0".into());
        let violations = verify(&p, &s, &SolverConfig::default());
        assert!(violations.iter().any(|v| matches!(v, Violation::MissingAssignment(_))));
    }

    #[test]
    fn overloaded_capacity_is_reported() {
        let (p, mut s) = solved();
        // Inflate the routed volume far past the 10 Gbps links.
        for flows in s.assignment.values_mut() {
            for f in flows {
                f.volume_gbps = 50.0;
            }
        }
        let violations = verify(&p, &s, &SolverConfig::default());
        assert!(violations.iter().any(|v| matches!(v, Violation::CapacityExceeded { .. })));
    }
}
