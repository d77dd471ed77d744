//! Topology document format (TOML).
//!
//! A document has three sections — `params`, `nodes`, `links` — with field
//! names matching the domain types; see `docs/topology-format.md` for the
//! schema. Saving then loading yields an identical topology (same ids, same
//! link set); all structural invariants are re-validated on load.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Link, LinkDirection, LinkId, Locus, Node, NodeId, Topology, TopologyParams};
use crate::metrics::DeviceParams;

#[derive(Debug, Serialize, Deserialize)]
struct TopologyDoc {
    params: ParamsDoc,
    #[serde(default)]
    nodes: Vec<NodeDoc>,
    #[serde(default)]
    links: Vec<LinkDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ParamsDoc {
    architecture: super::Architecture,
    cells: u32,
    racks_per_cell: u32,
    servers_per_rack: u32,
    awgr_ports: u32,
    #[serde(default)]
    device: DeviceParams,
}

#[derive(Debug, Serialize, Deserialize)]
struct NodeDoc {
    id: String,
    kind: super::DeviceKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cell: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rack: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    slot: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tier: Option<u8>,
}

#[derive(Debug, Serialize, Deserialize)]
struct LinkDoc {
    id: String,
    from: String,
    to: String,
    capacity: f64,
    direction: LinkDirection,
}

impl From<&Node> for NodeDoc {
    fn from(n: &Node) -> Self {
        NodeDoc {
            id: n.id.0.clone(),
            kind: n.kind,
            cell: n.locus.cell,
            rack: n.locus.rack,
            slot: n.locus.slot,
            tier: n.tier,
        }
    }
}

impl From<&Link> for LinkDoc {
    fn from(l: &Link) -> Self {
        LinkDoc {
            id: l.id.0.clone(),
            from: l.from.0.clone(),
            to: l.to.0.clone(),
            capacity: l.capacity_gbps,
            direction: l.direction,
        }
    }
}

/// Serializes a topology to its TOML document form.
pub fn save_topology_str(t: &Topology) -> String {
    let doc = TopologyDoc {
        params: ParamsDoc {
            architecture: t.params().architecture,
            cells: t.params().cells,
            racks_per_cell: t.params().racks_per_cell,
            servers_per_rack: t.params().servers_per_rack,
            awgr_ports: t.params().awgr_ports,
            device: t.params().device.clone(),
        },
        nodes: t.nodes().map(NodeDoc::from).collect(),
        links: t.links().map(LinkDoc::from).collect(),
    };
    toml::to_string_pretty(&doc).expect("topology document serializes")
}

/// Writes a topology document to `path`.
pub fn save_topology(t: &Topology, path: &Path) -> Result<(), super::TopologyError> {
    std::fs::write(path, save_topology_str(t)).map_err(|source| super::TopologyError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Parses and validates a topology document.
pub fn load_topology_str(text: &str) -> Result<Topology, super::TopologyError> {
    let doc: TopologyDoc =
        toml::from_str(text).map_err(|e| super::TopologyError::Parse(e.to_string()))?;
    let params = TopologyParams {
        architecture: doc.params.architecture,
        cells: doc.params.cells,
        racks_per_cell: doc.params.racks_per_cell,
        servers_per_rack: doc.params.servers_per_rack,
        awgr_ports: doc.params.awgr_ports,
        device: doc.params.device,
    };
    let nodes = doc
        .nodes
        .into_iter()
        .map(|n| Node {
            id: NodeId(n.id),
            kind: n.kind,
            locus: Locus { cell: n.cell, rack: n.rack, slot: n.slot },
            tier: n.tier,
        })
        .collect();
    let links = doc
        .links
        .into_iter()
        .map(|l| Link {
            id: LinkId(l.id),
            from: NodeId(l.from),
            to: NodeId(l.to),
            capacity_gbps: l.capacity,
            direction: l.direction,
        })
        .collect();
    Topology::new(params, nodes, links)
}

/// Reads and validates a topology document from `path`.
pub fn load_topology(path: &Path) -> Result<Topology, super::TopologyError> {
    let text = std::fs::read_to_string(path).map_err(|source| super::TopologyError::Io {
        path: path.display().to_string(),
        source,
    })?;
    load_topology_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{build_pon3, build_two_tier, TopologyError};

    #[test]
    fn round_trip_is_identity() {
        for t in [build_pon3(4), build_two_tier(2)] {
            let text = save_topology_str(&t);
            let loaded = load_topology_str(&text).unwrap();
            assert_eq!(t, loaded);
        }
    }

    #[test]
    fn rejects_layer_order_violation() {
        let text = r#"
[params]
architecture = "pon3"
cells = 1
racks_per_cell = 1
servers_per_rack = 1
awgr_ports = 4

[[nodes]]
id = "s"
kind = "server"

[[nodes]]
id = "x"
kind = "splitter"

[[links]]
id = "bad"
from = "s"
to = "x"
capacity = 10.0
direction = "uplink"
"#;
        let err = load_topology_str(text).unwrap_err();
        assert!(matches!(err, TopologyError::LayerOrder { .. }), "{err}");
    }

    #[test]
    fn rejects_zero_capacity() {
        let text = r#"
[params]
architecture = "pon3"
cells = 1
racks_per_cell = 1
servers_per_rack = 1
awgr_ports = 4

[[nodes]]
id = "s"
kind = "server"

[[nodes]]
id = "c"
kind = "coupler"

[[links]]
id = "l"
from = "s"
to = "c"
capacity = 0.0
direction = "uplink"
"#;
        let err = load_topology_str(text).unwrap_err();
        assert!(matches!(err, TopologyError::NonPositiveCapacity { .. }), "{err}");
    }

    #[test]
    fn parse_errors_name_the_field() {
        let err = load_topology_str("[params]\narchitecture = \"ring\"\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("architecture") || msg.contains("ring"), "{msg}");
    }
}
