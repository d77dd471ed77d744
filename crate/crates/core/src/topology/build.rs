//! Builders for the two supported fabrics.
//!
//! Both builders are pure and deterministic: equal parameters produce
//! byte-identical node and link sets. All wiring can be overridden by
//! authoring a topology document instead (see [`super::io`]).

use super::{
    Architecture, DeviceKind, Link, LinkDirection, Locus, Node, NodeId, Topology, TopologyParams,
};
use crate::metrics::DeviceParams;

fn node(id: String, kind: DeviceKind, locus: Locus, tier: Option<u8>) -> Node {
    Node { id: NodeId(id), kind, locus, tier }
}

fn link(from: &str, to: &str, capacity_gbps: f64, direction: LinkDirection) -> Link {
    Link {
        id: super::LinkId(format!("{from}--{to}")),
        from: NodeId(from.to_string()),
        to: NodeId(to.to_string()),
        capacity_gbps,
        direction,
    }
}

/// Builds the single-tier fabric: four racks, one coupler and one splitter
/// per rack, two 4x4 AWGRs and a single OLT.
///
/// Wiring: racks 0-1 hang off `awgr-1`, racks 2-3 off `awgr-2`. Each server
/// has one uplink into its rack coupler; each coupler has a single uplink
/// into its half's AWGR, and each splitter a single downlink from it. The
/// two AWGRs are joined by one inter-AWGR link per direction, which carries
/// all cross-half traffic. The OLT attaches to both AWGRs and provides the
/// only alternative once an inter-AWGR link dies. Each AWGR therefore uses
/// exactly four ports per direction: two coupler/splitter ports, one
/// inter-AWGR port and one OLT port.
pub fn build_pon3(servers_per_rack: u32) -> Topology {
    build_pon3_with(servers_per_rack, DeviceParams::default())
}

/// [`build_pon3`] with an explicit device parameter block.
pub fn build_pon3_with(servers_per_rack: u32, device: DeviceParams) -> Topology {
    assert!(servers_per_rack >= 1, "servers_per_rack must be >= 1");
    let racks = 4u32;
    let cap = device.link_capacity_gbps;
    let mut nodes = Vec::new();
    let mut links = Vec::new();

    for a in 1..=2u32 {
        nodes.push(node(format!("awgr-{a}"), DeviceKind::Awgr, Locus::default(), Some(1)));
    }
    nodes.push(node("olt-0".into(), DeviceKind::Olt, Locus::default(), None));

    for r in 0..racks {
        let cpl = format!("cpl-{r}");
        let spl = format!("spl-{r}");
        // Racks 0-1 belong to awgr-1, racks 2-3 to awgr-2.
        let awgr = format!("awgr-{}", 1 + r / 2);
        nodes.push(node(cpl.clone(), DeviceKind::Coupler, Locus::rack(r), None));
        nodes.push(node(spl.clone(), DeviceKind::Splitter, Locus::rack(r), None));
        links.push(link(&cpl, &awgr, cap, LinkDirection::Uplink));
        links.push(link(&awgr, &spl, cap, LinkDirection::Downlink));
        for s in 0..servers_per_rack {
            let srv = format!("srv-{r}-{s:02}");
            nodes.push(node(
                srv.clone(),
                DeviceKind::Server,
                Locus { cell: None, rack: Some(r), slot: Some(s) },
                None,
            ));
            links.push(link(&srv, &cpl, cap, LinkDirection::Uplink));
            links.push(link(&spl, &srv, cap, LinkDirection::Downlink));
        }
    }

    links.push(link("awgr-1", "awgr-2", cap, LinkDirection::InterAwgr));
    links.push(link("awgr-2", "awgr-1", cap, LinkDirection::InterAwgr));
    for a in 1..=2u32 {
        links.push(link(&format!("awgr-{a}"), "olt-0", cap, LinkDirection::OltAttach));
        links.push(link("olt-0", &format!("awgr-{a}"), cap, LinkDirection::OltAttach));
    }

    let params = TopologyParams {
        architecture: Architecture::Pon3,
        cells: 1,
        racks_per_cell: racks,
        servers_per_rack,
        awgr_ports: 4,
        device,
    };
    Topology::new(params, nodes, links).expect("pon3 builder produces a valid topology")
}

/// Builds the two-tier cascaded-AWGR fabric: four cells of four racks, two
/// couplers and two splitters per cell, first-tier AWGRs `x`/`y`, second-tier
/// AWGRs `u`/`v` and four OLT switches.
///
/// Wiring: every server has uplink A into its cell's coupler A and uplink B
/// into coupler B; cell i's coupler A feeds `awgr-x` and coupler B feeds
/// `awgr-y`; `awgr-x` feeds every cell's splitter A and `awgr-y` every
/// splitter B, so each first-tier AWGR interconnects all cells on its own
/// plane. The four upper ports of each first-tier AWGR carry one inter-AWGR
/// link per direction to each of `awgr-u` and `awgr-v`; `awgr-u` attaches
/// `olt-0`/`olt-1` and `awgr-v` attaches `olt-2`/`olt-3`, with symmetric
/// return links. Both splitters of a cell fan out to all of its servers.
pub fn build_two_tier(servers_per_rack: u32) -> Topology {
    build_two_tier_with(servers_per_rack, DeviceParams::default())
}

/// [`build_two_tier`] with an explicit device parameter block.
pub fn build_two_tier_with(servers_per_rack: u32, device: DeviceParams) -> Topology {
    assert!(servers_per_rack >= 1, "servers_per_rack must be >= 1");
    let cells = 4u32;
    let racks_per_cell = 4u32;
    let cap = device.link_capacity_gbps;
    let mut nodes = Vec::new();
    let mut links = Vec::new();

    for t1 in ["awgr-x", "awgr-y"] {
        nodes.push(node(t1.into(), DeviceKind::Awgr, Locus::default(), Some(1)));
    }
    for t2 in ["awgr-u", "awgr-v"] {
        nodes.push(node(t2.into(), DeviceKind::Awgr, Locus::default(), Some(2)));
    }
    for o in 0..4u32 {
        nodes.push(node(format!("olt-{o}"), DeviceKind::Olt, Locus::default(), None));
    }

    for c in 0..cells {
        let cpl_a = format!("cpl-{c}a");
        let cpl_b = format!("cpl-{c}b");
        let spl_a = format!("spl-{c}a");
        let spl_b = format!("spl-{c}b");
        for id in [&cpl_a, &cpl_b] {
            nodes.push(node(id.clone(), DeviceKind::Coupler, Locus::cell(c), None));
        }
        for id in [&spl_a, &spl_b] {
            nodes.push(node(id.clone(), DeviceKind::Splitter, Locus::cell(c), None));
        }
        links.push(link(&cpl_a, "awgr-x", cap, LinkDirection::Uplink));
        links.push(link(&cpl_b, "awgr-y", cap, LinkDirection::Uplink));
        links.push(link("awgr-x", &spl_a, cap, LinkDirection::Downlink));
        links.push(link("awgr-y", &spl_b, cap, LinkDirection::Downlink));

        for r in 0..racks_per_cell {
            for s in 0..servers_per_rack {
                let srv = format!("srv-{c}-{r}-{s:02}");
                nodes.push(node(
                    srv.clone(),
                    DeviceKind::Server,
                    Locus { cell: Some(c), rack: Some(r), slot: Some(s) },
                    None,
                ));
                links.push(link(&srv, &cpl_a, cap, LinkDirection::Uplink));
                links.push(link(&srv, &cpl_b, cap, LinkDirection::Uplink));
                links.push(link(&spl_a, &srv, cap, LinkDirection::Downlink));
                links.push(link(&spl_b, &srv, cap, LinkDirection::Downlink));
            }
        }
    }

    for t1 in ["awgr-x", "awgr-y"] {
        for t2 in ["awgr-u", "awgr-v"] {
            links.push(link(t1, t2, cap, LinkDirection::InterAwgr));
            links.push(link(t2, t1, cap, LinkDirection::InterAwgr));
        }
    }
    for (t2, olts) in [("awgr-u", [0u32, 1]), ("awgr-v", [2, 3])] {
        for o in olts {
            links.push(link(t2, &format!("olt-{o}"), cap, LinkDirection::OltAttach));
            links.push(link(&format!("olt-{o}"), t2, cap, LinkDirection::OltAttach));
        }
    }

    let params = TopologyParams {
        architecture: Architecture::TwoTier,
        cells,
        racks_per_cell,
        servers_per_rack,
        awgr_ports: 8,
        device,
    };
    Topology::new(params, nodes, links).expect("two-tier builder produces a valid topology")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::DeviceKind;

    fn count_kind(t: &Topology, kind: DeviceKind) -> usize {
        t.nodes().filter(|n| n.kind == kind).count()
    }

    fn count_direction(t: &Topology, d: LinkDirection) -> usize {
        t.links().filter(|l| l.direction == d).count()
    }

    #[test]
    fn pon3_default_counts() {
        let t = build_pon3(4);
        assert_eq!(count_kind(&t, DeviceKind::Server), 16);
        assert_eq!(count_kind(&t, DeviceKind::Coupler), 4);
        assert_eq!(count_kind(&t, DeviceKind::Splitter), 4);
        assert_eq!(count_kind(&t, DeviceKind::Awgr), 2);
        assert_eq!(count_kind(&t, DeviceKind::Olt), 1);
        assert_eq!(count_direction(&t, LinkDirection::InterAwgr), 2);
        assert_eq!(count_direction(&t, LinkDirection::OltAttach), 4);
    }

    #[test]
    fn pon3_counts_follow_closed_form() {
        // nodes = 4s + 11, links = 8s + 14 for s servers per rack
        for s in 1..=16u32 {
            let t = build_pon3(s);
            assert_eq!(t.node_count() as u32, 4 * s + 11, "nodes at s={s}");
            assert_eq!(t.link_count() as u32, 8 * s + 14, "links at s={s}");
        }
    }

    #[test]
    fn two_tier_default_counts() {
        let t = build_two_tier(4);
        assert_eq!(count_kind(&t, DeviceKind::Server), 64);
        assert_eq!(count_kind(&t, DeviceKind::Coupler), 8);
        assert_eq!(count_kind(&t, DeviceKind::Splitter), 8);
        assert_eq!(count_kind(&t, DeviceKind::Awgr), 4);
        assert_eq!(count_kind(&t, DeviceKind::Olt), 4);
        assert_eq!(count_direction(&t, LinkDirection::InterAwgr), 8);
        assert_eq!(count_direction(&t, LinkDirection::OltAttach), 8);
    }

    #[test]
    fn two_tier_counts_follow_closed_form() {
        // nodes = 16s + 24, links = 64s + 32 for s servers per rack
        for s in 1..=16u32 {
            let t = build_two_tier(s);
            assert_eq!(t.node_count() as u32, 16 * s + 24, "nodes at s={s}");
            assert_eq!(t.link_count() as u32, 64 * s + 32, "links at s={s}");
        }
    }

    #[test]
    fn two_tier_servers_have_two_uplinks_and_two_downlinks() {
        let t = build_two_tier(1);
        assert_eq!(t.servers().len(), 16);
        for srv in t.servers() {
            assert_eq!(t.out_links(&srv).len(), 2, "{srv} uplinks");
            assert_eq!(t.in_links(&srv).len(), 2, "{srv} downlinks");
        }
    }

    #[test]
    fn pon3_servers_have_one_uplink_and_one_downlink() {
        let t = build_pon3(4);
        for srv in t.servers() {
            assert_eq!(t.out_links(&srv).len(), 1);
            assert_eq!(t.in_links(&srv).len(), 1);
        }
    }

    #[test]
    fn builders_are_deterministic() {
        let a = build_pon3(3);
        let b = build_pon3(3);
        assert_eq!(a, b);
        let a = build_two_tier(2);
        let b = build_two_tier(2);
        assert_eq!(a, b);
    }

    #[test]
    fn awgr_port_budget_respected() {
        // Each pon3 AWGR touches exactly 4 in-links and 4 out-links
        // regardless of the rack size (couplers aggregate the servers).
        let t = build_pon3(16);
        for a in ["awgr-1", "awgr-2"] {
            assert_eq!(t.out_links(&a.into()).len(), 4);
            assert_eq!(t.in_links(&a.into()).len(), 4);
        }
        // Two-tier first tier: 4 coupler ins + one in from each of u/v, and
        // 4 splitter outs + one out to each of u/v. Second tier: one link per
        // direction per first-tier AWGR plus two OLT attachments each way.
        let t = build_two_tier(16);
        for a in ["awgr-x", "awgr-y"] {
            assert_eq!(t.out_links(&a.into()).len(), 6);
            assert_eq!(t.in_links(&a.into()).len(), 6);
        }
        for a in ["awgr-u", "awgr-v"] {
            assert_eq!(t.out_links(&a.into()).len(), 4);
            assert_eq!(t.in_links(&a.into()).len(), 4);
        }
    }
}
