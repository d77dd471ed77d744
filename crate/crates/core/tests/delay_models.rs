//! Behavioural checks of the two delay-accounting models on solved scenarios.

use ponfab_core::prelude::*;

fn solved(t: &Topology, demands: Vec<Demand>) -> (RoutingProblem, RoutingSolution) {
    let p = formulate(t, demands, RoutingMode::SinglePath, 16).unwrap();
    let s = solve(&p, &SolverConfig::default()).unwrap();
    (p, s)
}

#[test]
fn olt_relay_adds_exactly_the_olt_term_in_the_endpoints_model() {
    let t = build_pon3(1);
    let demands = vec![Demand::new("d0", "srv-0-00", "srv-2-00", 0.5)];

    let (p_nf, s_nf) = solved(&t, demands.clone());
    let scenario =
        FailureScenario::custom("cut", ["awgr-1--awgr-2".into()].into_iter().collect());
    let failed = apply_failure(&t, &scenario).unwrap();
    let (p_f3, s_f3) = solved(&failed, demands);

    let params = t.device_params();
    let d_nf = solution_delay(&p_nf, &s_nf, params, DelayModel::Endpoints);
    let d_f3 = solution_delay(&p_f3, &s_f3, params, DelayModel::Endpoints);

    let fwd = s_f3.total_olt_forwarded_gbps();
    assert!(fwd > 0.0);
    let olt_term = mm1_delay(fwd, params.olt_rate_gbps, params.packet_bits).unwrap();
    let got = d_f3.per_demand_us[&"d0".into()] - d_nf.per_demand_us[&"d0".into()];
    assert!((got - olt_term).abs() < 1e-12, "delta {got} vs olt term {olt_term}");
}

#[test]
fn per_link_delay_grows_when_traffic_relays() {
    let t = build_pon3(4);
    let spec = ExperimentSpec::default();
    let demands = generate_demands(&spec).unwrap();
    let (p_nf, s_nf) = solved(&t, demands.clone());

    let params = t.device_params();
    let nf_delay = solution_delay(&p_nf, &s_nf, params, DelayModel::PerLink);
    assert!(nf_delay.unstable_points.is_empty());

    for scenario in enumerate_single_failures(&t, FailureKind::F3) {
        let failed = apply_failure(&t, &scenario).unwrap();
        let (p, s) = solved(&failed, demands.clone());
        assert_eq!(s.status, SolveStatus::Optimal);
        let delay = solution_delay(&p, &s, params, DelayModel::PerLink);
        assert!(
            delay.mean_us > nf_delay.mean_us,
            "{}: {} <= {}",
            scenario.name(),
            delay.mean_us,
            nf_delay.mean_us
        );
    }
}

#[test]
fn endpoint_delays_follow_the_source_and_sink_loads() {
    let t = build_pon3(1);
    let demands = vec![
        Demand::new("d0", "srv-0-00", "srv-1-00", 0.2),
        Demand::new("d1", "srv-2-00", "srv-3-00", 0.4),
    ];
    let (p, s) = solved(&t, demands);
    let params = t.device_params();
    let d = solution_delay(&p, &s, params, DelayModel::Endpoints);
    // Source at 0.2 Gbps (15 us) plus sink at 0.2 Gbps (15 us).
    assert!((d.per_demand_us[&"d0".into()] - 30.0).abs() < 1e-9);
    // 0.4 Gbps endpoints queue at 20 us each.
    assert!((d.per_demand_us[&"d1".into()] - 40.0).abs() < 1e-9);
    assert!((d.max_us - 40.0).abs() < 1e-9);
    assert!((d.mean_us - 35.0).abs() < 1e-9);
}

#[test]
fn overloaded_endpoints_report_infinite_delay_without_crashing() {
    let t = build_pon3(4);
    // One server sources 1.6 Gbps against its 1 Gbps rate.
    let demands = vec![
        Demand::new("d0", "srv-0-00", "srv-1-00", 0.8),
        Demand::new("d1", "srv-0-00", "srv-2-00", 0.8),
        Demand::new("d2", "srv-3-00", "srv-1-01", 0.3),
    ];
    let (p, s) = solved(&t, demands);
    let params = t.device_params();
    let d = solution_delay(&p, &s, params, DelayModel::Endpoints);
    assert!(d.per_demand_us[&"d0".into()].is_infinite());
    assert!(d.per_demand_us[&"d1".into()].is_infinite());
    assert!(d.per_demand_us[&"d2".into()].is_finite());
    assert!(d.mean_us.is_infinite());
    assert!(d.unstable_points.iter().any(|p| p.contains("srv-0-00")));
    // The power model clamps the same overload and flags it.
    let power = total_power(&s, params);
    assert_eq!(power.clamped_servers, vec![NodeId::from("srv-0-00")]);
}

#[test]
fn dead_demands_carry_no_delay_entries() {
    let t = build_pon3(1);
    let scenario =
        FailureScenario::custom("cut", ["srv-0-00--cpl-0".into()].into_iter().collect());
    let failed = apply_failure(&t, &scenario).unwrap();
    let demands = vec![
        Demand::new("d0", "srv-0-00", "srv-1-00", 0.5),
        Demand::new("d1", "srv-1-00", "srv-2-00", 0.5),
    ];
    let (p, s) = solved(&failed, demands);
    assert_eq!(s.status, SolveStatus::Partial);
    let d = solution_delay(&p, &s, t.device_params(), DelayModel::Endpoints);
    assert!(!d.per_demand_us.contains_key(&"d0".into()));
    assert!(d.per_demand_us.contains_key(&"d1".into()));
}
