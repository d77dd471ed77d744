//! Splittable routing: single-path warm start plus split refinement.
//!
//! OLT power is the only routing-dependent cost and it grows with relayed
//! volume, so the refinement repeatedly moves relayed volume onto OLT-free
//! residual capacity, splitting demands across paths where a whole move does
//! not fit. When no single-path assignment exists at all, a greedy fractional
//! fill builds the starting point instead. The result is exact whenever
//! capacity is not binding and on shared-bottleneck instances small enough to
//! check by hand; it is a refinement, not a full LP solve.

use std::collections::BTreeMap;

use crate::topology::LinkId;

use super::{
    search, DemandId, OptimizeError, RoutingProblem, RoutingSolution, SolveStatus, SolverConfig,
};

type Flows = BTreeMap<DemandId, Vec<(usize, f64)>>;

const REFINE_PASS_LIMIT: usize = 64;
/// Volume below which a split branch is dropped as numeric dust.
const MIN_BRANCH_GBPS: f64 = 1e-12;

pub(super) fn solve_splittable(
    problem: &RoutingProblem,
    cfg: &SolverConfig,
) -> Result<RoutingSolution, OptimizeError> {
    let single = {
        let mut single_problem = problem.clone();
        single_problem.mode = super::RoutingMode::SinglePath;
        search::branch_and_bound(&single_problem, cfg)?
    };

    let mut flows: Flows = match single.status {
        SolveStatus::Infeasible => match greedy_fill(problem, cfg) {
            Some(flows) => flows,
            None => return Ok(search::build_solution(problem, &Flows::new(), SolveStatus::Infeasible)),
        },
        _ => single
            .assignment
            .iter()
            .map(|(id, fs)| {
                (id.clone(), fs.iter().map(|f| (f.path_index, f.volume_gbps)).collect())
            })
            .collect(),
    };

    refine(problem, cfg, &mut flows);

    let status =
        if problem.unroutable.is_empty() { SolveStatus::Optimal } else { SolveStatus::Partial };
    Ok(search::build_solution(problem, &flows, status))
}

/// Link loads implied by a flow table, accumulated in demand order.
fn link_loads(problem: &RoutingProblem, flows: &Flows) -> BTreeMap<LinkId, f64> {
    let mut loads: BTreeMap<LinkId, f64> = BTreeMap::new();
    for demand in &problem.demands {
        let Some(fs) = flows.get(&demand.id) else { continue };
        for &(pi, vol) in fs {
            for link in &problem.candidates[&demand.id][pi].links {
                *loads.entry(link.clone()).or_insert(0.0) += vol;
            }
        }
    }
    loads
}

fn residual(problem: &RoutingProblem, loads: &BTreeMap<LinkId, f64>, link: &LinkId, tol: f64) -> f64 {
    let cap = problem.topology.link(link).expect("candidate links exist").capacity_gbps;
    cap + tol - loads.get(link).copied().unwrap_or(0.0)
}

/// Greedy fractional fill in demand order, candidates in path order. Returns
/// `None` when some demand cannot be fully routed even fractionally.
fn greedy_fill(problem: &RoutingProblem, cfg: &SolverConfig) -> Option<Flows> {
    let tol = cfg.feasibility_tolerance_gbps;
    let mut flows = Flows::new();
    let mut loads: BTreeMap<LinkId, f64> = BTreeMap::new();
    for demand in &problem.demands {
        if problem.unroutable.contains(&demand.id) {
            continue;
        }
        let mut remaining = demand.volume_gbps;
        let mut branches: Vec<(usize, f64)> = Vec::new();
        for (pi, path) in problem.candidates[&demand.id].iter().enumerate() {
            if remaining <= tol {
                break;
            }
            let room = path
                .links
                .iter()
                .map(|l| residual(problem, &loads, l, tol))
                .fold(f64::INFINITY, f64::min);
            let take = remaining.min(room.max(0.0));
            if take > MIN_BRANCH_GBPS {
                for link in &path.links {
                    *loads.entry(link.clone()).or_insert(0.0) += take;
                }
                branches.push((pi, take));
                remaining -= take;
            }
        }
        if remaining > tol {
            return None;
        }
        flows.insert(demand.id.clone(), branches);
    }
    Some(flows)
}

/// Moves relayed volume onto OLT-free candidates while any move fits,
/// processing demands in id order for determinism.
fn refine(problem: &RoutingProblem, cfg: &SolverConfig, flows: &mut Flows) {
    let tol = cfg.feasibility_tolerance_gbps;
    for _ in 0..REFINE_PASS_LIMIT {
        let mut improved = false;
        let ids: Vec<DemandId> = flows.keys().cloned().collect();
        for id in ids {
            let candidates = &problem.candidates[&id];
            let relayed: Vec<usize> = flows[&id]
                .iter()
                .enumerate()
                .filter(|(_, (pi, _))| candidates[*pi].olt_relay)
                .map(|(slot, _)| slot)
                .collect();
            if relayed.is_empty() {
                continue;
            }
            for slot in relayed {
                let (from_pi, from_vol) = flows[&id][slot];
                if from_vol <= MIN_BRANCH_GBPS {
                    continue;
                }
                // Loads without this branch, so its own occupancy frees up.
                let mut loads = link_loads(problem, flows);
                for link in &candidates[from_pi].links {
                    *loads.get_mut(link).expect("branch links are loaded") -= from_vol;
                }
                let mut moved = 0.0;
                let mut additions: Vec<(usize, f64)> = Vec::new();
                for (pi, path) in candidates.iter().enumerate() {
                    if path.olt_relay || moved >= from_vol - MIN_BRANCH_GBPS {
                        continue;
                    }
                    let room = path
                        .links
                        .iter()
                        .map(|l| residual(problem, &loads, l, tol))
                        .fold(f64::INFINITY, f64::min);
                    let take = (from_vol - moved).min(room.max(0.0));
                    if take > MIN_BRANCH_GBPS {
                        for link in &path.links {
                            *loads.entry(link.clone()).or_insert(0.0) += take;
                        }
                        additions.push((pi, take));
                        moved += take;
                    }
                }
                if moved > MIN_BRANCH_GBPS {
                    improved = true;
                    let entry = flows.get_mut(&id).unwrap();
                    entry[slot].1 = from_vol - moved;
                    for (pi, vol) in additions {
                        if let Some(existing) = entry.iter_mut().find(|(epi, _)| *epi == pi) {
                            existing.1 += vol;
                        } else {
                            entry.push((pi, vol));
                        }
                    }
                    entry.retain(|(_, v)| *v > MIN_BRANCH_GBPS);
                    entry.sort_by_key(|(pi, _)| *pi);
                }
            }
        }
        if !improved {
            break;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizer::{formulate, solve, verify, Demand, RoutingMode};
    use crate::topology::build_pon3;

    #[test]
    fn matches_single_path_without_capacity_pressure() {
        let t = build_pon3(4);
        let demands = vec![
            Demand::new("d0", "srv-0-00", "srv-2-00", 0.5),
            Demand::new("d1", "srv-1-00", "srv-3-00", 0.4),
            Demand::new("d2", "srv-2-01", "srv-0-01", 0.6),
        ];
        let single =
            formulate(&t, demands.clone(), RoutingMode::SinglePath, 16).unwrap();
        let split = formulate(&t, demands, RoutingMode::Splittable, 16).unwrap();
        let ss = solve(&single, &SolverConfig::default()).unwrap();
        let sp = solve(&split, &SolverConfig::default()).unwrap();
        assert_eq!(ss.objective_w, sp.objective_w);
        assert!(sp.active_olts.is_empty());
        assert_eq!(verify(&split, &sp, &SolverConfig::default()), vec![]);
    }

    #[test]
    fn splits_off_a_shared_bottleneck() {
        // 12 Gbps must cross the 10 Gbps inter-AWGR link: d0 (rack 0 ->
        // rack 2) and d1 (rack 1 -> rack 3) share it on their direct paths.
        // Single-path relays one whole 6 Gbps demand through the OLT;
        // splitting leaves 4 Gbps of d1 on the direct plane and relays 2.
        let t = build_pon3(2);
        let demands = vec![
            Demand::new("d0", "srv-0-00", "srv-2-00", 6.0),
            Demand::new("d1", "srv-1-00", "srv-3-01", 6.0),
        ];
        let p = formulate(&t, demands, RoutingMode::Splittable, 16).unwrap();
        let s = solve(&p, &SolverConfig::default()).unwrap();
        assert_eq!(s.status, SolveStatus::Optimal);
        assert_eq!(verify(&p, &s, &SolverConfig::default()), vec![]);
        let relayed = s.total_olt_forwarded_gbps();
        assert!((relayed - 2.0).abs() < 1e-6, "relayed {relayed} Gbps");
        let single = {
            let mut sp = p.clone();
            sp.mode = RoutingMode::SinglePath;
            solve(&sp, &SolverConfig::default()).unwrap()
        };
        assert!((single.total_olt_forwarded_gbps() - 6.0).abs() < 1e-6);
        assert!(s.objective_w < single.objective_w);
    }

    #[test]
    fn infeasible_in_both_modes_when_a_shared_uplink_overflows() {
        // Two 6 Gbps demands from the same server push 12 Gbps through the
        // 10 Gbps server uplink, which every candidate path of both demands
        // crosses. No split can fix that.
        let t = build_pon3(2);
        let demands = vec![
            Demand::new("d0", "srv-0-00", "srv-1-00", 6.0),
            Demand::new("d1", "srv-0-00", "srv-2-00", 6.0),
        ];
        let p = formulate(&t, demands, RoutingMode::Splittable, 16).unwrap();
        let s = solve(&p, &SolverConfig::default()).unwrap();
        assert_eq!(s.status, SolveStatus::Infeasible);
    }
}
