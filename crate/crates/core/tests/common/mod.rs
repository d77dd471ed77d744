//! Independent graph-search oracle used to cross-check path enumeration and
//! reachability. Deliberately re-derives the traversal rules from the device
//! semantics instead of calling the production path code.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use ponfab_core::prelude::*;

/// Adjacency rebuilt from the raw link list.
pub struct OracleGraph {
    pub out: BTreeMap<NodeId, Vec<Link>>,
    pub kind: BTreeMap<NodeId, DeviceKind>,
}

impl OracleGraph {
    pub fn new(t: &Topology) -> Self {
        let mut out: BTreeMap<NodeId, Vec<Link>> = BTreeMap::new();
        let mut kind = BTreeMap::new();
        for node in t.nodes() {
            kind.insert(node.id.clone(), node.kind);
            out.entry(node.id.clone()).or_default();
        }
        for link in t.links() {
            out.get_mut(&link.from).unwrap().push(link.clone());
        }
        for links in out.values_mut() {
            links.sort_by(|a, b| a.id.cmp(&b.id));
        }
        OracleGraph { out, kind }
    }

    /// May a path that entered `kind` on `inc` leave on `out`?
    fn step_ok(kind: DeviceKind, inc: LinkDirection, out: LinkDirection) -> bool {
        use DeviceKind::*;
        use LinkDirection::*;
        match kind {
            Server => false,
            Coupler => inc == Uplink && out == Uplink,
            Splitter => inc == Downlink && out == Downlink,
            Olt => inc == OltAttach && out == OltAttach,
            Awgr => match (inc, out) {
                // Traffic keeps descending or heads for an OLT; an AWGR never
                // turns inter-AWGR traffic straight back onto another
                // inter-AWGR link, and OLT bounces happen at the OLT itself.
                (Uplink, Downlink) | (Uplink, InterAwgr) | (Uplink, OltAttach) => true,
                (InterAwgr, Downlink) | (InterAwgr, OltAttach) => true,
                (OltAttach, Downlink) | (OltAttach, InterAwgr) => true,
                _ => false,
            },
        }
    }

    /// BFS over (node, incoming-direction) states.
    pub fn reachable(&self, src: &NodeId, dst: &NodeId) -> bool {
        let mut seen: BTreeSet<(NodeId, LinkDirection)> = BTreeSet::new();
        let mut queue: VecDeque<(NodeId, Option<LinkDirection>)> = VecDeque::new();
        queue.push_back((src.clone(), None));
        while let Some((at, inc)) = queue.pop_front() {
            for link in &self.out[&at] {
                let ok = match inc {
                    None => link.direction == LinkDirection::Uplink,
                    Some(inc) => Self::step_ok(self.kind[&at], inc, link.direction),
                };
                if !ok {
                    continue;
                }
                if link.to == *dst {
                    return true;
                }
                if self.kind[&link.to] == DeviceKind::Server {
                    continue;
                }
                if seen.insert((link.to.clone(), link.direction)) {
                    queue.push_back((link.to.clone(), Some(link.direction)));
                }
            }
        }
        false
    }

    /// All node-simple OLT-free paths from `src` to `dst`, as link-id lists.
    pub fn olt_free_paths(&self, src: &NodeId, dst: &NodeId) -> Vec<Vec<LinkId>> {
        let mut found = Vec::new();
        let mut trail = Vec::new();
        let mut visited: BTreeSet<NodeId> = [src.clone()].into_iter().collect();
        self.dfs_olt_free(src, dst, None, &mut trail, &mut visited, &mut found);
        found
    }

    fn dfs_olt_free(
        &self,
        at: &NodeId,
        dst: &NodeId,
        inc: Option<LinkDirection>,
        trail: &mut Vec<LinkId>,
        visited: &mut BTreeSet<NodeId>,
        found: &mut Vec<Vec<LinkId>>,
    ) {
        if at == dst {
            found.push(trail.clone());
            return;
        }
        for link in &self.out[at] {
            let ok = match inc {
                None => link.direction == LinkDirection::Uplink,
                Some(inc) => Self::step_ok(self.kind[at], inc, link.direction),
            };
            if !ok
                || self.kind[&link.to] == DeviceKind::Olt
                || (self.kind[&link.to] == DeviceKind::Server && link.to != *dst)
                || visited.contains(&link.to)
            {
                continue;
            }
            visited.insert(link.to.clone());
            trail.push(link.id.clone());
            self.dfs_olt_free(&link.to, dst, Some(link.direction), trail, visited, found);
            trail.pop();
            visited.remove(&link.to);
        }
    }
}

/// Every ordered server pair of a topology.
pub fn server_pairs(t: &Topology) -> Vec<(NodeId, NodeId)> {
    let servers = t.servers();
    let mut pairs = Vec::new();
    for a in &servers {
        for b in &servers {
            if a != b {
                pairs.push((a.clone(), b.clone()));
            }
        }
    }
    pairs
}

/// Count of ordered pairs the oracle can still connect.
pub fn reachable_pair_count(t: &Topology) -> usize {
    let g = OracleGraph::new(t);
    server_pairs(t).iter().filter(|(a, b)| g.reachable(a, b)).count()
}
