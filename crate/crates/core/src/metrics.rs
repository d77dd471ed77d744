//! Power and queuing-delay models.
//!
//! Power follows the usual affine device model: a powered device draws its
//! idle floor when active and climbs linearly to its maximum at full
//! utilization. Servers additionally carry a constant ONU transceiver draw.
//! Passive devices (couplers, AWGRs, splitters) never appear here.
//!
//! Delay is M/M/1 sojourn time per queuing point with packet-normalized
//! rates: `W = packet_bits / (rate - load)`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::optimizer::{DemandId, RoutingProblem, RoutingSolution};
use crate::topology::NodeId;

/// Device parameters used by the power and delay models.
///
/// Defaults model a 301 W peak / 201 W idle server with a 1 Gbps NIC and a
/// 2.5 W ONU, a 1940 W peak / 60 W idle OLT switch rated at 8600 Gbps, and
/// 10 Gbps physical links. `packet_bits` is 12000 (1500-byte packets).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DeviceParams {
    pub server_max_w: f64,
    pub server_idle_w: f64,
    pub server_rate_gbps: f64,
    pub onu_w: f64,
    pub onu_rate_gbps: f64,
    pub olt_max_w: f64,
    pub olt_idle_w: f64,
    pub olt_rate_gbps: f64,
    pub link_capacity_gbps: f64,
    pub packet_bits: f64,
}

impl Default for DeviceParams {
    fn default() -> Self {
        Self {
            server_max_w: 301.0,
            server_idle_w: 201.0,
            server_rate_gbps: 1.0,
            onu_w: 2.5,
            onu_rate_gbps: 10.0,
            olt_max_w: 1940.0,
            olt_idle_w: 60.0,
            olt_rate_gbps: 8600.0,
            link_capacity_gbps: 10.0,
            packet_bits: 12000.0,
        }
    }
}

impl DeviceParams {
    /// Validates the parameter block (max >= idle >= 0, positive rates).
    pub fn validate(&self) -> Result<(), MetricsError> {
        let powered = [
            ("server", self.server_max_w, self.server_idle_w),
            ("olt", self.olt_max_w, self.olt_idle_w),
        ];
        for (name, max, idle) in powered {
            if !(max >= idle && idle >= 0.0) {
                return Err(MetricsError::BadParams(format!(
                    "{name}: need max >= idle >= 0 (max={max}, idle={idle})"
                )));
            }
        }
        let rates = [
            ("server_rate_gbps", self.server_rate_gbps),
            ("onu_rate_gbps", self.onu_rate_gbps),
            ("olt_rate_gbps", self.olt_rate_gbps),
            ("link_capacity_gbps", self.link_capacity_gbps),
            ("packet_bits", self.packet_bits),
        ];
        for (name, v) in rates {
            if v.is_nan() || v <= 0.0 {
                return Err(MetricsError::BadParams(format!("{name} must be > 0, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("invalid device parameters: {0}")]
    BadParams(String),
    #[error("negative traffic volume: {0} Gbps")]
    NegativeTraffic(f64),
    #[error("traffic {load} Gbps exceeds device rate {rate} Gbps")]
    OverRate { load: f64, rate: f64 },
    #[error("unstable queue: load {load} Gbps >= service rate {rate} Gbps")]
    UnstableQueue { load: f64, rate: f64 },
}

/// Power drawn by one server given its transmitted/received traffic and an
/// optional processing load expressed in Gbps-equivalent units.
///
/// Inactive servers draw nothing. Active servers draw
/// `idle + (max - idle) * u + onu` where `u = min(1, (tx+rx+proc)/rate)`;
/// loads past the rate clamp utilization at 1 (the clamp is surfaced by
/// [`total_power`] in [`PowerReport::clamped_servers`]).
pub fn server_power(
    active: bool,
    tx_gbps: f64,
    rx_gbps: f64,
    proc_gbps: f64,
    p: &DeviceParams,
) -> Result<f64, MetricsError> {
    for v in [tx_gbps, rx_gbps, proc_gbps] {
        if v < 0.0 {
            return Err(MetricsError::NegativeTraffic(v));
        }
    }
    if !active {
        return Ok(0.0);
    }
    let util = ((tx_gbps + rx_gbps + proc_gbps) / p.server_rate_gbps).min(1.0);
    Ok(p.server_idle_w + (p.server_max_w - p.server_idle_w) * util + p.onu_w)
}

/// Whether a server's offered load exceeds its data rate (utilization clamp).
pub fn server_overloaded(tx_gbps: f64, rx_gbps: f64, proc_gbps: f64, p: &DeviceParams) -> bool {
    tx_gbps + rx_gbps + proc_gbps > p.server_rate_gbps
}

/// Power drawn by one OLT switch forwarding `forwarded_gbps` of relay traffic.
pub fn olt_power(active: bool, forwarded_gbps: f64, p: &DeviceParams) -> Result<f64, MetricsError> {
    if forwarded_gbps < 0.0 {
        return Err(MetricsError::NegativeTraffic(forwarded_gbps));
    }
    if forwarded_gbps > p.olt_rate_gbps {
        return Err(MetricsError::OverRate { load: forwarded_gbps, rate: p.olt_rate_gbps });
    }
    if !active {
        return Ok(0.0);
    }
    Ok(p.olt_idle_w + (p.olt_max_w - p.olt_idle_w) * forwarded_gbps / p.olt_rate_gbps)
}

/// Total power decomposition for a routing solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerReport {
    pub total_w: f64,
    pub per_server_w: BTreeMap<NodeId, f64>,
    pub per_olt_w: BTreeMap<NodeId, f64>,
    /// Idle floors of all active servers and OLTs.
    pub idle_w: f64,
    /// Utilization-proportional share of all active servers and OLTs.
    pub proportional_w: f64,
    /// Constant ONU draw of all active servers.
    pub onu_w: f64,
    /// Servers whose offered load exceeded their data rate (utilization clamped at 1).
    pub clamped_servers: Vec<NodeId>,
}

/// Sums [`server_power`] over active servers and [`olt_power`] over active
/// OLTs for a solution. `total_w` is exactly the sum of the two per-device
/// maps, accumulated in id order.
pub fn total_power(solution: &RoutingSolution, p: &DeviceParams) -> PowerReport {
    let mut per_server_w = BTreeMap::new();
    let mut per_olt_w = BTreeMap::new();
    let mut idle_w = 0.0;
    let mut onu_w = 0.0;
    let mut clamped_servers = Vec::new();

    for server in &solution.active_servers {
        let tx = solution.server_tx_gbps.get(server).copied().unwrap_or(0.0);
        let rx = solution.server_rx_gbps.get(server).copied().unwrap_or(0.0);
        let proc = solution.server_proc_gbps.get(server).copied().unwrap_or(0.0);
        let w = server_power(true, tx, rx, proc, p).unwrap_or(f64::NAN);
        if server_overloaded(tx, rx, proc, p) {
            clamped_servers.push(server.clone());
        }
        per_server_w.insert(server.clone(), w);
        idle_w += p.server_idle_w;
        onu_w += p.onu_w;
    }
    for olt in &solution.active_olts {
        let fwd = solution.olt_forwarded_gbps.get(olt).copied().unwrap_or(0.0);
        let w = olt_power(true, fwd, p).unwrap_or(f64::NAN);
        per_olt_w.insert(olt.clone(), w);
        idle_w += p.olt_idle_w;
    }

    let server_sum = per_server_w.values().fold(0.0, |a, b| a + b);
    let olt_sum = per_olt_w.values().fold(0.0, |a, b| a + b);
    let total_w = server_sum + olt_sum;
    PowerReport {
        total_w,
        per_server_w,
        per_olt_w,
        idle_w,
        proportional_w: total_w - idle_w - onu_w,
        onu_w,
        clamped_servers,
    }
}

/// M/M/1 sojourn time in microseconds per packet.
///
/// `load` and `rate` are in Gbps; with `mu = rate/packet_bits` and
/// `lambda = load/packet_bits` the sojourn time `1/(mu - lambda)` reduces to
/// `packet_bits / (rate - load)`.
pub fn mm1_delay(load_gbps: f64, rate_gbps: f64, packet_bits: f64) -> Result<f64, MetricsError> {
    if load_gbps < 0.0 {
        return Err(MetricsError::NegativeTraffic(load_gbps));
    }
    if rate_gbps.is_nan() || rate_gbps <= 0.0 || packet_bits.is_nan() || packet_bits <= 0.0 {
        return Err(MetricsError::BadParams(format!(
            "rate and packet size must be > 0 (rate={rate_gbps}, packet_bits={packet_bits})"
        )));
    }
    if load_gbps >= rate_gbps {
        return Err(MetricsError::UnstableQueue { load: load_gbps, rate: rate_gbps });
    }
    // Gbps -> bits/us is a factor of 1e3.
    Ok(packet_bits / ((rate_gbps - load_gbps) * 1e3))
}

/// Where queuing delay is accounted.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DelayModel {
    /// Delay at the source server egress, the destination server ingress and
    /// every traversed OLT. This is the default.
    #[default]
    Endpoints,
    /// Delay summed over every traversed link, served at link capacity.
    PerLink,
}

/// Per-demand and aggregate queuing delay for a solution.
///
/// Unstable queuing points make the affected demands (and the aggregates)
/// infinite rather than erroring; the offending points are listed in
/// `unstable_points`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayReport {
    pub model: DelayModel,
    pub per_demand_us: BTreeMap<DemandId, f64>,
    pub mean_us: f64,
    pub max_us: f64,
    /// Delay at each queuing point, keyed `server-tx/<id>`, `server-rx/<id>`,
    /// `olt/<id>` or `link/<id>`.
    pub per_point_us: BTreeMap<String, f64>,
    pub unstable_points: Vec<String>,
}

/// Computes the per-demand queuing delay of a routed solution.
///
/// In the endpoints model a demand waits at its source server (load = all
/// traffic that server sources), at its destination server (load = all
/// traffic it sinks) and at every OLT its path traverses (load = that OLT's
/// total forwarded traffic). In the per-link model it waits at every link of
/// its path (load = that link's total load, rate = link capacity).
pub fn solution_delay(
    problem: &RoutingProblem,
    solution: &RoutingSolution,
    p: &DeviceParams,
    model: DelayModel,
) -> DelayReport {
    let mut per_point_us: BTreeMap<String, f64> = BTreeMap::new();
    let mut unstable_points = Vec::new();
    let mut point = |key: String, load: f64, rate: f64, unstable: &mut Vec<String>| -> f64 {
        let us = match mm1_delay(load, rate, p.packet_bits) {
            Ok(us) => us,
            Err(_) => {
                unstable.push(key.clone());
                f64::INFINITY
            }
        };
        per_point_us.insert(key, us);
        us
    };

    let mut per_demand_us = BTreeMap::new();
    for demand in &problem.demands {
        let Some(flows) = solution.assignment.get(&demand.id) else {
            continue; // unroutable demands carry no delay
        };
        let us = match model {
            DelayModel::Endpoints => {
                let tx = solution.server_tx_gbps.get(&demand.src).copied().unwrap_or(0.0);
                let rx = solution.server_rx_gbps.get(&demand.dst).copied().unwrap_or(0.0);
                let mut us = point(
                    format!("server-tx/{}", demand.src),
                    tx,
                    p.server_rate_gbps,
                    &mut unstable_points,
                ) + point(
                    format!("server-rx/{}", demand.dst),
                    rx,
                    p.server_rate_gbps,
                    &mut unstable_points,
                );
                // Each traversed OLT queues the demand once, at its total
                // forwarded load. With split flows, count an OLT once.
                let mut olts_seen = std::collections::BTreeSet::new();
                for flow in flows {
                    for node in &flow.nodes {
                        if solution.olt_forwarded_gbps.contains_key(node)
                            && olts_seen.insert(node.clone())
                        {
                            let fwd = solution.olt_forwarded_gbps[node];
                            us += point(
                                format!("olt/{node}"),
                                fwd,
                                p.olt_rate_gbps,
                                &mut unstable_points,
                            );
                        }
                    }
                }
                us
            }
            DelayModel::PerLink => {
                // For split assignments, weight each branch by its volume share.
                let total: f64 = flows.iter().map(|f| f.volume_gbps).sum();
                let mut us = 0.0;
                for flow in flows {
                    let mut branch = 0.0;
                    for link_id in &flow.links {
                        let load = solution.link_loads_gbps.get(link_id).copied().unwrap_or(0.0);
                        let cap = problem
                            .topology
                            .link(link_id)
                            .map(|l| l.capacity_gbps)
                            .unwrap_or(p.link_capacity_gbps);
                        branch += point(format!("link/{link_id}"), load, cap, &mut unstable_points);
                    }
                    let share = if total > 0.0 { flow.volume_gbps / total } else { 0.0 };
                    us += share * branch;
                }
                us
            }
        };
        per_demand_us.insert(demand.id.clone(), us);
    }

    unstable_points.sort();
    unstable_points.dedup();
    let n = per_demand_us.len();
    let mean_us = if n == 0 { 0.0 } else { per_demand_us.values().sum::<f64>() / n as f64 };
    let max_us = per_demand_us.values().copied().fold(0.0, f64::max);
    DelayReport { model, per_demand_us, mean_us, max_us, per_point_us, unstable_points }
}
