//! A hand-authored fabric exercises the whole pipeline on a non-built
//! wiring, including device-parameter overrides from the document.

use ponfab_core::prelude::*;

const DOC: &str = r#"
[params]
architecture = "pon3"
cells = 1
racks_per_cell = 2
servers_per_rack = 1
awgr_ports = 2

[params.device]
server_max_w = 200.0
server_idle_w = 100.0
server_rate_gbps = 1.0
onu_w = 0.5
onu_rate_gbps = 10.0
olt_max_w = 1940.0
olt_idle_w = 60.0
olt_rate_gbps = 8600.0
link_capacity_gbps = 5.0
packet_bits = 8000.0

[[nodes]]
id = "srv-a"
kind = "server"
rack = 0
slot = 0

[[nodes]]
id = "srv-b"
kind = "server"
rack = 1
slot = 0

[[nodes]]
id = "cpl-a"
kind = "coupler"
rack = 0

[[nodes]]
id = "cpl-b"
kind = "coupler"
rack = 1

[[nodes]]
id = "awgr-m"
kind = "awgr"
tier = 1

[[nodes]]
id = "spl-a"
kind = "splitter"
rack = 0

[[nodes]]
id = "spl-b"
kind = "splitter"
rack = 1

[[links]]
id = "ua"
from = "srv-a"
to = "cpl-a"
capacity = 5.0
direction = "uplink"

[[links]]
id = "ub"
from = "srv-b"
to = "cpl-b"
capacity = 5.0
direction = "uplink"

[[links]]
id = "ca"
from = "cpl-a"
to = "awgr-m"
capacity = 5.0
direction = "uplink"

[[links]]
id = "cb"
from = "cpl-b"
to = "awgr-m"
capacity = 5.0
direction = "uplink"

[[links]]
id = "da"
from = "awgr-m"
to = "spl-a"
capacity = 5.0
direction = "downlink"

[[links]]
id = "db"
from = "awgr-m"
to = "spl-b"
capacity = 5.0
direction = "downlink"

[[links]]
id = "sa"
from = "spl-a"
to = "srv-a"
capacity = 5.0
direction = "downlink"

[[links]]
id = "sb"
from = "spl-b"
to = "srv-b"
capacity = 5.0
direction = "downlink"
"#;

#[test]
fn custom_fabric_solves_with_overridden_parameters() {
    let t = ponfab_core::topology::load_topology_str(DOC).unwrap();
    assert_eq!(t.node_count(), 7);
    assert_eq!(t.link_count(), 8);
    assert_eq!(t.device_params().server_idle_w, 100.0);

    assert!(matches!(
        classify_link(&t, &"ua".into()).unwrap(),
        LinkClass::Failure(FailureKind::F1)
    ));
    assert!(matches!(
        classify_link(&t, &"da".into()).unwrap(),
        LinkClass::Failure(FailureKind::F4)
    ));

    let paths = candidate_paths(&t, &"srv-a".into(), &"srv-b".into(), 8).unwrap();
    assert_eq!(paths.len(), 1);
    assert_eq!(
        paths[0].links.iter().map(|l| l.0.as_str()).collect::<Vec<_>>(),
        vec!["ua", "ca", "db", "sb"]
    );

    let demands = vec![Demand::new("d0", "srv-a", "srv-b", 0.5)];
    let problem = formulate(&t, demands.clone(), RoutingMode::SinglePath, 8).unwrap();
    let cfg = SolverConfig::default();
    let solution = solve(&problem, &cfg).unwrap();
    assert_eq!(solution.status, SolveStatus::Optimal);
    assert_eq!(verify(&problem, &solution, &cfg), vec![]);

    // Two active servers under the overridden affine model:
    // 100 + (200-100)*0.5 + 0.5 = 150.5 W each.
    assert!((solution.objective_w - 301.0).abs() < 1e-9);

    // Endpoint delay under the overridden 8000-bit packets:
    // 8000/(0.5 Gbps) = 16 us at each endpoint.
    let delay = solution_delay(&problem, &solution, t.device_params(), DelayModel::Endpoints);
    assert!((delay.per_demand_us[&"d0".into()] - 32.0).abs() < 1e-9);

    // The single downlink into rack b is a single point of failure here.
    let cut = FailureScenario::custom("cut", ["db".into()].into_iter().collect());
    let failed = apply_failure(&t, &cut).unwrap();
    let partial = formulate(&failed, demands.clone(), RoutingMode::SinglePath, 8).unwrap();
    let s = solve(&partial, &cfg).unwrap();
    assert_eq!(s.status, SolveStatus::Partial);
    let down = down_analysis(&t, &cut, &demands).unwrap();
    assert!(!down.survivable);
    assert!(down.down_servers.contains(&"srv-b".into()));
}

#[test]
fn custom_fabric_documents_round_trip() {
    let t = ponfab_core::topology::load_topology_str(DOC).unwrap();
    let text = ponfab_core::topology::save_topology_str(&t);
    let again = ponfab_core::topology::load_topology_str(&text).unwrap();
    assert_eq!(t, again);
}
