//! Device/link graph model of the two PON fabrics.
//!
//! A [`Topology`] is an immutable directed multigraph of devices and
//! capacitated fibre links, plus the parameter block it was built from.
//! Builders for the two supported architectures live in [`build`]; layered
//! path enumeration lives in [`paths`]; the on-disk document format lives in
//! [`io`].

pub mod build;
pub mod io;
pub mod paths;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::DeviceParams;

pub use build::{build_pon3, build_pon3_with, build_two_tier, build_two_tier_with};
pub use io::{load_topology, load_topology_str, save_topology, save_topology_str};
pub use paths::{candidate_paths, reachable, CandidatePath};

/// Opaque node identifier, unique within a topology.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub String);

/// Opaque link identifier, unique within a topology.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LinkId(pub String);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for LinkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for NodeId {
    fn from(s: &str) -> Self {
        NodeId(s.to_string())
    }
}

impl From<&str> for LinkId {
    fn from(s: &str) -> Self {
        LinkId(s.to_string())
    }
}

/// Device role in the fabric.
///
/// Couplers, AWGRs and splitters are passive: they never draw power. Only
/// servers and OLT switches carry power models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeviceKind {
    Server,
    Coupler,
    Awgr,
    Splitter,
    Olt,
}

impl DeviceKind {
    pub fn is_passive(self) -> bool {
        matches!(self, DeviceKind::Coupler | DeviceKind::Awgr | DeviceKind::Splitter)
    }

    pub fn is_powered(self) -> bool {
        !self.is_passive()
    }
}

impl fmt::Display for DeviceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DeviceKind::Server => "server",
            DeviceKind::Coupler => "coupler",
            DeviceKind::Awgr => "awgr",
            DeviceKind::Splitter => "splitter",
            DeviceKind::Olt => "olt",
        };
        f.write_str(s)
    }
}

/// Physical placement of a device; unused coordinates stay `None`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Locus {
    pub cell: Option<u32>,
    pub rack: Option<u32>,
    pub slot: Option<u32>,
}

impl Locus {
    pub fn rack(rack: u32) -> Self {
        Locus { cell: None, rack: Some(rack), slot: None }
    }

    pub fn cell(cell: u32) -> Self {
        Locus { cell: Some(cell), rack: None, slot: None }
    }
}

/// One device.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    pub kind: DeviceKind,
    #[serde(default)]
    pub locus: Locus,
    /// AWGR tier (1 or 2); `None` for every other device kind.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tier: Option<u8>,
}

/// Link role, which together with the endpoint kinds fixes the layer rules
/// and the failure class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LinkDirection {
    Uplink,
    Downlink,
    InterAwgr,
    OltAttach,
}

impl fmt::Display for LinkDirection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            LinkDirection::Uplink => "uplink",
            LinkDirection::Downlink => "downlink",
            LinkDirection::InterAwgr => "inter-awgr",
            LinkDirection::OltAttach => "olt-attach",
        };
        f.write_str(s)
    }
}

/// One directed fibre link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub id: LinkId,
    pub from: NodeId,
    pub to: NodeId,
    pub capacity_gbps: f64,
    pub direction: LinkDirection,
}

/// Architecture tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Architecture {
    Pon3,
    TwoTier,
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Architecture::Pon3 => f.write_str("pon3"),
            Architecture::TwoTier => f.write_str("two-tier"),
        }
    }
}

impl std::str::FromStr for Architecture {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pon3" => Ok(Architecture::Pon3),
            "two-tier" | "twotier" | "two_tier" => Ok(Architecture::TwoTier),
            other => Err(format!("unknown architecture `{other}` (expected pon3 or two-tier)")),
        }
    }
}

/// Build parameters a topology was constructed with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologyParams {
    pub architecture: Architecture,
    pub cells: u32,
    pub racks_per_cell: u32,
    pub servers_per_rack: u32,
    /// AWGR port count M (informational; the wiring is explicit in the links).
    pub awgr_ports: u32,
    #[serde(default)]
    pub device: DeviceParams,
}

#[derive(Debug, Error)]
pub enum TopologyError {
    #[error("duplicate node id `{0}`")]
    DuplicateNode(NodeId),
    #[error("duplicate link id `{0}`")]
    DuplicateLink(LinkId),
    #[error("link `{link}` references unknown node `{node}`")]
    UnknownEndpoint { link: LinkId, node: NodeId },
    #[error("link `{link}` has non-positive capacity {capacity} Gbps")]
    NonPositiveCapacity { link: LinkId, capacity: f64 },
    #[error("link `{link}` is a self-loop on `{node}`")]
    SelfLoop { link: LinkId, node: NodeId },
    #[error(
        "link `{link}` violates layer order: {from_kind} -> {to_kind} cannot be a {direction} link"
    )]
    LayerOrder { link: LinkId, from_kind: DeviceKind, to_kind: DeviceKind, direction: LinkDirection },
    #[error("unknown link id `{0}`")]
    UnknownLink(LinkId),
    #[error("unknown node id `{0}`")]
    UnknownNode(NodeId),
    #[error("node `{0}` is not a server")]
    NotAServer(NodeId),
    #[error("source and destination must be distinct servers")]
    SameEndpoints,
    #[error("invalid device parameters: {0}")]
    BadDeviceParams(#[from] crate::metrics::MetricsError),
    #[error("failed to parse topology document: {0}")]
    Parse(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// Checks that a (from-kind, to-kind, direction) triple is one of the wiring
/// patterns the layered model admits.
pub fn layer_allows(from: DeviceKind, to: DeviceKind, direction: LinkDirection) -> bool {
    use DeviceKind::*;
    use LinkDirection::*;
    matches!(
        (from, to, direction),
        (Server, Coupler, Uplink)
            | (Coupler, Awgr, Uplink)
            | (Awgr, Awgr, InterAwgr)
            | (Awgr, Splitter, Downlink)
            | (Splitter, Server, Downlink)
            | (Awgr, Olt, OltAttach)
            | (Olt, Awgr, OltAttach)
    )
}

/// Immutable device/link graph plus its build parameters.
///
/// Topologies are validated on construction and never mutated afterwards;
/// failure injection produces a new value. They are therefore safe to share
/// across concurrently evaluated scenarios.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    params: TopologyParams,
    nodes: BTreeMap<NodeId, Node>,
    links: BTreeMap<LinkId, Link>,
    /// Outgoing link ids per node, sorted by link id.
    out_links: BTreeMap<NodeId, Vec<LinkId>>,
    /// Incoming link ids per node, sorted by link id.
    in_links: BTreeMap<NodeId, Vec<LinkId>>,
}

impl Topology {
    /// Validates and assembles a topology from parts.
    pub fn new(
        params: TopologyParams,
        nodes: Vec<Node>,
        links: Vec<Link>,
    ) -> Result<Self, TopologyError> {
        params.device.validate()?;

        let mut node_map = BTreeMap::new();
        for node in nodes {
            if node_map.insert(node.id.clone(), node.clone()).is_some() {
                return Err(TopologyError::DuplicateNode(node.id));
            }
        }

        let mut link_map: BTreeMap<LinkId, Link> = BTreeMap::new();
        for link in links {
            if link_map.contains_key(&link.id) {
                return Err(TopologyError::DuplicateLink(link.id));
            }
            if link.capacity_gbps.is_nan() || link.capacity_gbps <= 0.0 {
                return Err(TopologyError::NonPositiveCapacity {
                    link: link.id,
                    capacity: link.capacity_gbps,
                });
            }
            if link.from == link.to {
                return Err(TopologyError::SelfLoop { node: link.from, link: link.id });
            }
            let from = node_map
                .get(&link.from)
                .ok_or_else(|| TopologyError::UnknownEndpoint {
                    link: link.id.clone(),
                    node: link.from.clone(),
                })?
                .kind;
            let to = node_map
                .get(&link.to)
                .ok_or_else(|| TopologyError::UnknownEndpoint {
                    link: link.id.clone(),
                    node: link.to.clone(),
                })?
                .kind;
            if !layer_allows(from, to, link.direction) {
                return Err(TopologyError::LayerOrder {
                    link: link.id,
                    from_kind: from,
                    to_kind: to,
                    direction: link.direction,
                });
            }
            link_map.insert(link.id.clone(), link);
        }

        let mut out_links: BTreeMap<NodeId, Vec<LinkId>> =
            node_map.keys().map(|id| (id.clone(), Vec::new())).collect();
        let mut in_links = out_links.clone();
        for (id, link) in &link_map {
            out_links.get_mut(&link.from).unwrap().push(id.clone());
            in_links.get_mut(&link.to).unwrap().push(id.clone());
        }
        // BTreeMap iteration already visits link ids in order, so the
        // adjacency vectors are sorted; keep that invariant explicit.
        debug_assert!(out_links.values().all(|v| v.windows(2).all(|w| w[0] < w[1])));

        Ok(Topology { params, nodes: node_map, links: link_map, out_links, in_links })
    }

    pub fn params(&self) -> &TopologyParams {
        &self.params
    }

    pub fn device_params(&self) -> &DeviceParams {
        &self.params.device
    }

    pub fn node(&self, id: &NodeId) -> Option<&Node> {
        self.nodes.get(id)
    }

    pub fn link(&self, id: &LinkId) -> Option<&Link> {
        self.links.get(id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &Node> {
        self.nodes.values()
    }

    pub fn links(&self) -> impl Iterator<Item = &Link> {
        self.links.values()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    /// Server ids in id order.
    pub fn servers(&self) -> Vec<NodeId> {
        self.nodes
            .values()
            .filter(|n| n.kind == DeviceKind::Server)
            .map(|n| n.id.clone())
            .collect()
    }

    /// Outgoing links of a node, in link-id order.
    pub fn out_links(&self, id: &NodeId) -> &[LinkId] {
        self.out_links.get(id).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Incoming links of a node, in link-id order.
    pub fn in_links(&self, id: &NodeId) -> &[LinkId] {
        self.in_links.get(id).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Copy of this topology with the given links removed. The original is
    /// untouched; unknown ids are an error.
    pub fn without_links(&self, removed: &BTreeSet<LinkId>) -> Result<Topology, TopologyError> {
        for id in removed {
            if !self.links.contains_key(id) {
                return Err(TopologyError::UnknownLink(id.clone()));
            }
        }
        let links = self
            .links
            .values()
            .filter(|l| !removed.contains(&l.id))
            .cloned()
            .collect::<Vec<_>>();
        Topology::new(self.params.clone(), self.nodes.values().cloned().collect(), links)
    }

    pub(crate) fn expect_server(&self, id: &NodeId) -> Result<(), TopologyError> {
        match self.nodes.get(id) {
            None => Err(TopologyError::UnknownNode(id.clone())),
            Some(n) if n.kind != DeviceKind::Server => Err(TopologyError::NotAServer(id.clone())),
            Some(_) => Ok(()),
        }
    }
}
