//! Layered path enumeration between servers.
//!
//! A candidate path ascends through uplinks, crosses the AWGR fabric (and at
//! most one OLT bounce) and descends through downlinks. AWGRs are
//! wavelength-agnostic port crossbars, but they are still directional
//! devices: traffic that entered on the uplink plane cannot re-emerge on the
//! uplink plane, and an AWGR cannot turn inter-AWGR traffic straight back
//! onto another inter-AWGR link without an OLT in between. The transition
//! table below encodes exactly that.
//!
//! Paths are simple per `(node, incoming-direction)` state: an AWGR may be
//! revisited in a different propagation direction (which is how an OLT relay
//! re-enters the fabric), every other device at most once. Enumeration over
//! these states is equivalent to BFS reachability over the same state graph,
//! which [`reachable`] exploits.

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::{DeviceKind, Link, LinkDirection, LinkId, NodeId, Topology, TopologyError};

/// Hard cap on complete paths collected before sorting, guarding pathological
/// hand-written configs. The built fabrics stay far below it.
const ENUMERATION_CAP: usize = 100_000;

/// One simple layered device path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidatePath {
    /// Devices from source server to destination server.
    pub nodes: Vec<NodeId>,
    /// Links in traversal order.
    pub links: Vec<LinkId>,
    /// True when the path bounces through an OLT switch.
    pub olt_relay: bool,
}

impl CandidatePath {
    pub fn hop_count(&self) -> usize {
        self.links.len()
    }
}

/// Legal (incoming, outgoing) direction pairs at an AWGR.
fn awgr_transition(incoming: LinkDirection, outgoing: LinkDirection) -> bool {
    use LinkDirection::*;
    matches!(
        (incoming, outgoing),
        (Uplink, Downlink)
            | (Uplink, InterAwgr)
            | (Uplink, OltAttach)
            | (InterAwgr, Downlink)
            | (InterAwgr, OltAttach)
            | (OltAttach, Downlink)
            | (OltAttach, InterAwgr)
    )
}

/// Legal (incoming, outgoing) direction pairs at any intermediate device.
fn transition_allowed(kind: DeviceKind, incoming: LinkDirection, outgoing: LinkDirection) -> bool {
    use LinkDirection::*;
    match kind {
        DeviceKind::Server => false, // servers terminate paths
        DeviceKind::Coupler => incoming == Uplink && outgoing == Uplink,
        DeviceKind::Splitter => incoming == Downlink && outgoing == Downlink,
        DeviceKind::Olt => incoming == OltAttach && outgoing == OltAttach,
        DeviceKind::Awgr => awgr_transition(incoming, outgoing),
    }
}

/// Enumerates the simple layered paths from `src` to `dst`, deterministically
/// ordered: OLT-free paths first, then by hop count, then by the
/// lexicographic link-id sequence; truncated to `max_paths`. Returns an empty
/// list when the servers are disconnected.
pub fn candidate_paths(
    t: &Topology,
    src: &NodeId,
    dst: &NodeId,
    max_paths: usize,
) -> Result<Vec<CandidatePath>, TopologyError> {
    t.expect_server(src)?;
    t.expect_server(dst)?;
    if src == dst {
        return Err(TopologyError::SameEndpoints);
    }
    if max_paths == 0 {
        return Ok(Vec::new());
    }

    let mut found = Vec::new();
    let mut trail: Vec<&Link> = Vec::new();
    let mut visited: BTreeSet<(NodeId, LinkDirection)> = BTreeSet::new();
    dfs(t, src, dst, None, &mut trail, &mut visited, &mut found);

    found.sort_by(|a, b| {
        (a.olt_relay, a.hop_count(), &a.links).cmp(&(b.olt_relay, b.hop_count(), &b.links))
    });
    found.truncate(max_paths);
    Ok(found)
}

fn dfs<'t>(
    t: &'t Topology,
    at: &NodeId,
    dst: &NodeId,
    incoming: Option<LinkDirection>,
    trail: &mut Vec<&'t Link>,
    visited: &mut BTreeSet<(NodeId, LinkDirection)>,
    found: &mut Vec<CandidatePath>,
) {
    if found.len() >= ENUMERATION_CAP {
        return;
    }
    if at == dst {
        let nodes = std::iter::once(trail[0].from.clone())
            .chain(trail.iter().map(|l| l.to.clone()))
            .collect::<Vec<_>>();
        let olt_relay = nodes.iter().any(|n| t.node(n).map(|n| n.kind) == Some(DeviceKind::Olt));
        found.push(CandidatePath {
            nodes,
            links: trail.iter().map(|l| l.id.clone()).collect(),
            olt_relay,
        });
        return;
    }

    let kind = t.node(at).expect("trail nodes exist").kind;
    for link_id in t.out_links(at) {
        let link = t.link(link_id).expect("adjacency is consistent");
        let legal = match incoming {
            // At the source server only uplinks leave.
            None => link.direction == LinkDirection::Uplink,
            Some(inc) => transition_allowed(kind, inc, link.direction),
        };
        if !legal {
            continue;
        }
        // Intermediate servers are dead ends; only `dst` may be entered.
        let next_kind = t.node(&link.to).expect("validated endpoints").kind;
        if next_kind == DeviceKind::Server && link.to != *dst {
            continue;
        }
        let state = (link.to.clone(), link.direction);
        if !visited.insert(state.clone()) {
            continue;
        }
        trail.push(link);
        dfs(t, &link.to, dst, Some(link.direction), trail, visited, found);
        trail.pop();
        visited.remove(&state);
    }
}

/// Whether any layered path connects `src` to `dst`: BFS over the
/// `(node, incoming-direction)` state graph used by [`candidate_paths`].
pub fn reachable(t: &Topology, src: &NodeId, dst: &NodeId) -> Result<bool, TopologyError> {
    t.expect_server(src)?;
    t.expect_server(dst)?;
    if src == dst {
        return Err(TopologyError::SameEndpoints);
    }

    let mut seen: BTreeSet<(NodeId, LinkDirection)> = BTreeSet::new();
    let mut queue: VecDeque<(NodeId, Option<LinkDirection>)> = VecDeque::new();
    queue.push_back((src.clone(), None));
    while let Some((at, incoming)) = queue.pop_front() {
        let kind = t.node(&at).expect("states reference known nodes").kind;
        for link_id in t.out_links(&at) {
            let link = t.link(link_id).expect("adjacency is consistent");
            let legal = match incoming {
                None => link.direction == LinkDirection::Uplink,
                Some(inc) => transition_allowed(kind, inc, link.direction),
            };
            if !legal {
                continue;
            }
            if link.to == *dst {
                return Ok(true);
            }
            let next_kind = t.node(&link.to).expect("validated endpoints").kind;
            if next_kind == DeviceKind::Server {
                continue;
            }
            if seen.insert((link.to.clone(), link.direction)) {
                queue.push_back((link.to.clone(), Some(link.direction)));
            }
        }
    }
    Ok(false)
}
