//! Exact single-path search: branch-and-bound and the exhaustive oracle.
//!
//! Server power is fixed by the demand endpoints, so both searches compare
//! assignments purely on OLT power. To make the two routes bit-identical on
//! equal assignments, every evaluation sums per-link and per-OLT volumes in
//! demand order and walks OLTs in id order; nothing is accumulated
//! incrementally across backtracking steps.

use std::collections::{BTreeMap, BTreeSet};

use crate::metrics::{self, DeviceParams};
use crate::topology::{CandidatePath, LinkId, NodeId};

use super::{
    Demand, DemandId, OptimizeError, PathFlow, RoutingProblem, RoutingSolution, SolveStatus,
    SolverConfig,
};

const BRUTE_FORCE_LIMIT: f64 = 1e6;

/// Per-problem data shared by both search routes.
struct SearchSpace<'p> {
    problem: &'p RoutingProblem,
    /// Routable demands, in problem order.
    demands: Vec<&'p Demand>,
    /// Candidate paths aligned with `demands`.
    cands: Vec<&'p [CandidatePath]>,
    /// The OLT a candidate bounces through (paths traverse at most one).
    olt_of: Vec<Vec<Option<NodeId>>>,
    /// All OLT node ids, in id order.
    olts: Vec<NodeId>,
    /// Admissible minimum OLT power added by demands `i..`, per prefix length.
    min_future_w: Vec<f64>,
}

impl<'p> SearchSpace<'p> {
    fn new(problem: &'p RoutingProblem) -> Self {
        let params = problem.topology.device_params();
        let demands: Vec<&Demand> =
            problem.demands.iter().filter(|d| !problem.unroutable.contains(&d.id)).collect();
        let cands: Vec<&[CandidatePath]> =
            demands.iter().map(|d| problem.candidates[&d.id].as_slice()).collect();
        let olt_of: Vec<Vec<Option<NodeId>>> = cands
            .iter()
            .map(|paths| {
                paths
                    .iter()
                    .map(|p| {
                        p.nodes
                            .iter()
                            .find(|n| {
                                problem.topology.node(n).map(|n| n.kind)
                                    == Some(crate::topology::DeviceKind::Olt)
                            })
                            .cloned()
                    })
                    .collect()
            })
            .collect();
        let olts: Vec<NodeId> = problem
            .topology
            .nodes()
            .filter(|n| n.kind == crate::topology::DeviceKind::Olt)
            .map(|n| n.id.clone())
            .collect();

        // A demand with an OLT-free candidate can add zero OLT power; one
        // without adds at least its volume's proportional term.
        let slope = (params.olt_max_w - params.olt_idle_w) / params.olt_rate_gbps;
        let mut min_future_w = vec![0.0; demands.len() + 1];
        for i in (0..demands.len()).rev() {
            let own = if cands[i].iter().any(|p| !p.olt_relay) {
                0.0
            } else {
                slope * demands[i].volume_gbps
            };
            min_future_w[i] = min_future_w[i + 1] + own;
        }

        SearchSpace { problem, demands, cands, olt_of, olts, min_future_w }
    }

    /// OLT power of a prefix assignment, evaluated fresh: per-OLT forwarded
    /// volume summed in demand order, OLTs visited in id order.
    fn olt_power_w(&self, choices: &[usize], params: &DeviceParams) -> f64 {
        let mut forwarded: BTreeMap<&NodeId, f64> = BTreeMap::new();
        for (i, &c) in choices.iter().enumerate() {
            if let Some(olt) = &self.olt_of[i][c] {
                *forwarded.entry(olt).or_insert(0.0) += self.demands[i].volume_gbps;
            }
        }
        let mut total = 0.0;
        for olt in &self.olts {
            if let Some(fwd) = forwarded.get(olt) {
                total += metrics::olt_power(true, *fwd, params).unwrap_or(f64::INFINITY);
            }
        }
        total
    }

    /// Whether extending the prefix with path `c` for demand `choices.len()`
    /// keeps every link of that path within capacity. Loads are recomputed
    /// from the prefix, so the check is independent of search history.
    fn fits(&self, choices: &[usize], c: usize, tol: f64) -> bool {
        let next = choices.len();
        let path = &self.cands[next][c];
        for link_id in &path.links {
            let mut load = self.demands[next].volume_gbps;
            for (i, &ci) in choices.iter().enumerate() {
                if self.cands[i][ci].links.contains(link_id) {
                    load += self.demands[i].volume_gbps;
                }
            }
            let cap = self.problem.topology.link(link_id).expect("candidate links exist").capacity_gbps;
            if load > cap + tol {
                return false;
            }
        }
        true
    }
}

/// Assembles a full [`RoutingSolution`] from per-demand `(path_index, volume)`
/// flows. The objective is set to the metrics module's recomputation of the
/// power sum, so the two always agree bit-for-bit.
pub(super) fn build_solution(
    problem: &RoutingProblem,
    flows_by_demand: &BTreeMap<DemandId, Vec<(usize, f64)>>,
    status: SolveStatus,
) -> RoutingSolution {
    let mut link_loads: BTreeMap<LinkId, f64> = BTreeMap::new();
    let mut olt_forwarded: BTreeMap<NodeId, f64> = BTreeMap::new();
    let mut server_tx: BTreeMap<NodeId, f64> = BTreeMap::new();
    let mut server_rx: BTreeMap<NodeId, f64> = BTreeMap::new();
    let mut assignment: BTreeMap<DemandId, Vec<PathFlow>> = BTreeMap::new();

    for demand in &problem.demands {
        let Some(flows) = flows_by_demand.get(&demand.id) else { continue };
        *server_tx.entry(demand.src.clone()).or_insert(0.0) += demand.volume_gbps;
        *server_rx.entry(demand.dst.clone()).or_insert(0.0) += demand.volume_gbps;
        let mut path_flows = Vec::new();
        for &(path_index, volume) in flows {
            let path = &problem.candidates[&demand.id][path_index];
            for link in &path.links {
                *link_loads.entry(link.clone()).or_insert(0.0) += volume;
            }
            for node in &path.nodes {
                if problem.topology.node(node).map(|n| n.kind)
                    == Some(crate::topology::DeviceKind::Olt)
                {
                    *olt_forwarded.entry(node.clone()).or_insert(0.0) += volume;
                }
            }
            path_flows.push(PathFlow {
                path_index,
                links: path.links.clone(),
                nodes: path.nodes.clone(),
                olt_relay: path.olt_relay,
                volume_gbps: volume,
            });
        }
        assignment.insert(demand.id.clone(), path_flows);
    }

    let active_servers: BTreeSet<NodeId> =
        server_tx.keys().chain(server_rx.keys()).cloned().collect();
    let active_olts: BTreeSet<NodeId> = olt_forwarded.keys().cloned().collect();
    let server_proc: BTreeMap<NodeId, f64> = active_servers
        .iter()
        .filter_map(|s| problem.processing_gbps.get(s).map(|v| (s.clone(), *v)))
        .collect();

    let mut solution = RoutingSolution {
        status,
        objective_w: 0.0,
        active_servers,
        active_olts,
        unroutable: problem.unroutable.clone(),
        link_loads_gbps: link_loads,
        olt_forwarded_gbps: olt_forwarded,
        server_tx_gbps: server_tx,
        server_rx_gbps: server_rx,
        server_proc_gbps: server_proc,
        assignment,
    };
    solution.objective_w = if status == SolveStatus::Infeasible {
        f64::INFINITY
    } else {
        metrics::total_power(&solution, problem.topology.device_params()).total_w
    };
    solution
}

fn finish(problem: &RoutingProblem, space: &SearchSpace, best: Option<Vec<usize>>) -> RoutingSolution {
    let status = match (&best, problem.unroutable.is_empty()) {
        (None, _) if !space.demands.is_empty() => SolveStatus::Infeasible,
        (_, true) => SolveStatus::Optimal,
        (_, false) => SolveStatus::Partial,
    };
    let mut flows = BTreeMap::new();
    if let Some(choices) = best {
        for (i, c) in choices.iter().enumerate() {
            flows.insert(space.demands[i].id.clone(), vec![(*c, space.demands[i].volume_gbps)]);
        }
    }
    build_solution(problem, &flows, status)
}

/// Exact single-path solve by depth-first branch-and-bound over path indices.
///
/// Children are explored in candidate order and the incumbent only improves
/// strictly, so the returned assignment is the lexicographically smallest
/// among the optima — the same tie-break [`brute_force`] applies. The bound
/// (forced server power + current OLT power + admissible future minimum) is
/// only used to prune with a small guard band, never to accept.
pub(super) fn branch_and_bound(
    problem: &RoutingProblem,
    cfg: &SolverConfig,
) -> Result<RoutingSolution, OptimizeError> {
    let space = SearchSpace::new(problem);
    let params = problem.topology.device_params();

    let mut best: Option<Vec<usize>> = None;
    let mut best_olt_w = f64::INFINITY;
    let mut choices: Vec<usize> = Vec::with_capacity(space.demands.len());
    let mut nodes_visited: u64 = 0;

    // Explicit DFS over (depth, next path index) to keep the node budget easy
    // to enforce.
    let mut stack: Vec<usize> = vec![0];
    while let Some(next_path) = stack.pop() {
        let depth = choices.len();
        if next_path == 0 {
            nodes_visited += 1;
            if nodes_visited > cfg.node_limit {
                return Err(OptimizeError::NodeLimit(cfg.node_limit));
            }
        }
        if depth == space.demands.len() {
            // Leaf: every routable demand has a path; compare on OLT power.
            let olt_w = space.olt_power_w(&choices, params);
            if olt_w < best_olt_w {
                best_olt_w = olt_w;
                best = Some(choices.clone());
            }
            if choices.pop().is_some() {
                continue;
            }
            break;
        }
        if next_path >= space.cands[depth].len() {
            // Exhausted this demand's candidates; backtrack.
            if choices.pop().is_none() {
                break;
            }
            continue;
        }
        // Re-queue the sibling before descending.
        stack.push(next_path + 1);

        if !space.fits(&choices, next_path, cfg.feasibility_tolerance_gbps) {
            continue;
        }
        choices.push(next_path);
        if best_olt_w.is_finite() {
            // Every leaf below this node costs at least the node's own OLT
            // power: forwarded volumes only grow and the evaluation sums them
            // in a fixed order, so the comparison is float-exact. Pruning on
            // >= keeps the tie-break intact because leaves visited later can
            // only tie, never replace, the incumbent.
            let partial = space.olt_power_w(&choices, params);
            if partial >= best_olt_w {
                choices.pop();
                continue;
            }
            // The future term is an estimate, so it only prunes with a guard
            // band against float noise.
            let lb = partial + space.min_future_w[choices.len()];
            let guard = 1e-9 * (1.0 + best_olt_w.abs());
            if lb >= best_olt_w + guard {
                choices.pop();
                continue;
            }
        }
        stack.push(0);
    }

    Ok(finish(problem, &space, best))
}

/// Exhaustive enumeration of all single-path assignments in lexicographic
/// path-index order (earliest demand most significant), keeping the first
/// strictly best. Requires the assignment count to stay within `1e6`.
pub(super) fn brute_force(problem: &RoutingProblem) -> Result<RoutingSolution, OptimizeError> {
    if problem.mode != super::RoutingMode::SinglePath {
        return Err(OptimizeError::WrongMode);
    }
    let space = SearchSpace::new(problem);
    let params = problem.topology.device_params();
    let cfg = SolverConfig::default();

    let assignments: f64 = space.cands.iter().map(|c| c.len() as f64).product();
    if assignments > BRUTE_FORCE_LIMIT {
        return Err(OptimizeError::TooLarge { assignments, limit: BRUTE_FORCE_LIMIT });
    }

    let mut best: Option<Vec<usize>> = None;
    let mut best_olt_w = f64::INFINITY;
    let mut choices: Vec<usize> = Vec::new();

    fn recurse(
        space: &SearchSpace,
        params: &DeviceParams,
        tol: f64,
        choices: &mut Vec<usize>,
        best: &mut Option<Vec<usize>>,
        best_olt_w: &mut f64,
    ) {
        let depth = choices.len();
        if depth == space.demands.len() {
            let olt_w = space.olt_power_w(choices, params);
            if olt_w < *best_olt_w {
                *best_olt_w = olt_w;
                *best = Some(choices.clone());
            }
            return;
        }
        for c in 0..space.cands[depth].len() {
            // A prefix that already violates capacity cannot be completed:
            // volumes only accumulate.
            if !space.fits(choices, c, tol) {
                continue;
            }
            choices.push(c);
            recurse(space, params, tol, choices, best, best_olt_w);
            choices.pop();
        }
    }

    recurse(
        &space,
        params,
        cfg.feasibility_tolerance_gbps,
        &mut choices,
        &mut best,
        &mut best_olt_w,
    );
    Ok(finish(problem, &space, best))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizer::{formulate, RoutingMode};
    use crate::topology::build_pon3;

    fn pon3_problem(demands: Vec<Demand>) -> RoutingProblem {
        formulate(&build_pon3(4), demands, RoutingMode::SinglePath, 16).unwrap()
    }

    #[test]
    fn single_demand_single_path() {
        let t = build_pon3(1);
        let failed = t
            .without_links(&["awgr-1--awgr-2".into()].into_iter().collect())
            .unwrap();
        // Cross-half with the inter-AWGR link dead: only relay paths remain.
        let p = formulate(
            &failed,
            vec![Demand::new("d0", "srv-0-00", "srv-2-00", 0.5)],
            RoutingMode::SinglePath,
            16,
        )
        .unwrap();
        let s = branch_and_bound(&p, &SolverConfig::default()).unwrap();
        assert_eq!(s.status, SolveStatus::Optimal);
        assert_eq!(s.active_olts.len(), 1);
        let flows = &s.assignment[&"d0".into()];
        assert_eq!(flows.len(), 1);
        assert!(flows[0].olt_relay);
    }

    #[test]
    fn one_candidate_means_no_choice() {
        let t = build_pon3(1);
        let p = formulate(
            &t,
            vec![Demand::new("d0", "srv-0-00", "srv-3-00", 0.5)],
            RoutingMode::SinglePath,
            1,
        )
        .unwrap();
        assert_eq!(p.candidates[&"d0".into()].len(), 1);
        let s = branch_and_bound(&p, &SolverConfig::default()).unwrap();
        let b = brute_force(&p).unwrap();
        assert_eq!(s.assignment[&"d0".into()][0].path_index, 0);
        assert_eq!(s, b);
    }

    #[test]
    fn avoids_the_olt_when_a_direct_path_exists() {
        let p = pon3_problem(vec![
            Demand::new("d0", "srv-0-00", "srv-2-00", 0.5),
            Demand::new("d1", "srv-1-00", "srv-3-00", 0.7),
        ]);
        let s = branch_and_bound(&p, &SolverConfig::default()).unwrap();
        assert_eq!(s.status, SolveStatus::Optimal);
        assert!(s.active_olts.is_empty());
        assert!(s.olt_forwarded_gbps.is_empty());
        // Objective is pure server power: 4 endpoints at their volumes.
        let params = build_pon3(4).device_params().clone();
        let expected = metrics::server_power(true, 0.5, 0.0, 0.0, &params).unwrap()
            + metrics::server_power(true, 0.0, 0.5, 0.0, &params).unwrap()
            + metrics::server_power(true, 0.7, 0.0, 0.0, &params).unwrap()
            + metrics::server_power(true, 0.0, 0.7, 0.0, &params).unwrap();
        assert!((s.objective_w - expected).abs() < 1e-9);
    }

    #[test]
    fn capacity_violation_is_infeasible() {
        // Two 6 Gbps demands from the same rack share the single 10 Gbps
        // rack uplink on every candidate path.
        let p = pon3_problem(vec![
            Demand::new("d0", "srv-0-00", "srv-1-00", 6.0),
            Demand::new("d1", "srv-0-01", "srv-1-01", 6.0),
        ]);
        let s = branch_and_bound(&p, &SolverConfig::default()).unwrap();
        assert_eq!(s.status, SolveStatus::Infeasible);
        assert!(s.assignment.is_empty());
        assert!(s.objective_w.is_infinite());
        let b = brute_force(&p).unwrap();
        assert_eq!(b.status, SolveStatus::Infeasible);
    }

    #[test]
    fn unroutable_demands_yield_partial() {
        let t = build_pon3(1);
        let failed =
            t.without_links(&["srv-0-00--cpl-0".into()].into_iter().collect()).unwrap();
        let p = formulate(
            &failed,
            vec![
                Demand::new("d0", "srv-0-00", "srv-1-00", 0.5),
                Demand::new("d1", "srv-1-00", "srv-2-00", 0.5),
            ],
            RoutingMode::SinglePath,
            16,
        )
        .unwrap();
        let s = branch_and_bound(&p, &SolverConfig::default()).unwrap();
        assert_eq!(s.status, SolveStatus::Partial);
        assert!(s.unroutable.contains(&"d0".into()));
        assert!(s.assignment.contains_key(&"d1".into()));
        assert!(!s.assignment.contains_key(&"d0".into()));
        // Dead endpoints are not activated.
        assert!(!s.active_servers.contains(&"srv-0-00".into()));
    }

    #[test]
    fn matches_brute_force_on_a_forced_relay() {
        let t = build_pon3(2);
        let failed = t
            .without_links(&["awgr-1--awgr-2".into()].into_iter().collect())
            .unwrap();
        let p = formulate(
            &failed,
            vec![
                Demand::new("d0", "srv-0-00", "srv-2-00", 0.5),
                Demand::new("d1", "srv-0-01", "srv-1-00", 0.3),
                Demand::new("d2", "srv-3-00", "srv-0-00", 0.4),
            ],
            RoutingMode::SinglePath,
            16,
        )
        .unwrap();
        let s = branch_and_bound(&p, &SolverConfig::default()).unwrap();
        let b = brute_force(&p).unwrap();
        assert_eq!(s.objective_w, b.objective_w);
        assert_eq!(s.assignment, b.assignment);
        assert_eq!(s.active_olts.len(), 1);
    }

    #[test]
    fn node_limit_is_enforced() {
        let p = pon3_problem(vec![
            Demand::new("d0", "srv-0-00", "srv-2-00", 0.5),
            Demand::new("d1", "srv-1-00", "srv-3-00", 0.5),
            Demand::new("d2", "srv-2-01", "srv-0-01", 0.5),
        ]);
        let cfg = SolverConfig { node_limit: 2, ..SolverConfig::default() };
        assert!(matches!(branch_and_bound(&p, &cfg), Err(OptimizeError::NodeLimit(2))));
    }

    #[test]
    fn brute_force_rejects_oversized_instances() {
        let t = crate::topology::build_two_tier(2);
        let servers = t.servers();
        let demands: Vec<Demand> = (0..12)
            .map(|i| {
                Demand::new(
                    format!("d{i:02}"),
                    servers[i].0.clone(),
                    servers[(i + 9) % servers.len()].0.clone(),
                    0.3,
                )
            })
            .collect();
        let p = formulate(&t, demands, RoutingMode::SinglePath, 16).unwrap();
        assert!(matches!(brute_force(&p), Err(OptimizeError::TooLarge { .. })));
    }
}
