#!/usr/bin/env python3
"""Smoke test for the ponfab Python extension.

Build the extension first:

    cargo build -p ponfab-py --release

The script copies target/release/libponfab.so next to itself as ponfab.so and
imports it from there.
"""

import math
import pathlib
import shutil
import sys
import tempfile

HERE = pathlib.Path(__file__).resolve().parent
ROOT = HERE.parent


def stage_extension():
    built = ROOT / "target" / "release" / "libponfab.so"
    if not built.exists():
        sys.exit("libponfab.so not found; run `cargo build -p ponfab-py --release` first")
    dest = HERE / "ponfab.so"
    if not dest.exists() or built.stat().st_mtime > dest.stat().st_mtime:
        shutil.copy2(built, dest)
    sys.path.insert(0, str(HERE))


stage_extension()
import ponfab  # noqa: E402


def close(a, b, tol=1e-9):
    return abs(a - b) <= tol * max(1.0, abs(a), abs(b))


def main():
    # Topology builders and counts.
    pon3 = ponfab.Topology.build_pon3(4)
    assert pon3.node_count == 27 and pon3.link_count == 46, repr(pon3)
    assert len(pon3.servers) == 16
    two_tier = ponfab.Topology.build_two_tier(4)
    assert two_tier.node_count == 88 and two_tier.link_count == 288, repr(two_tier)

    # Document round trip.
    assert ponfab.Topology.loads(pon3.dumps()).dumps() == pon3.dumps()

    # Link classification and failure enumeration.
    assert pon3.classify_link("srv-0-00--cpl-0") == "F1"
    assert pon3.classify_link("awgr-1--awgr-2") == "F3"
    assert pon3.classify_link("awgr-1--olt-0") == "olt-attach"
    assert len(pon3.enumerate_single_failures("F1")) == 16
    assert len(pon3.enumerate_single_failures("F3")) == 2
    assert ponfab.links_of_kind(pon3, "F2") == [
        "cpl-0--awgr-1", "cpl-1--awgr-1", "cpl-2--awgr-2", "cpl-3--awgr-2",
    ]

    # Candidate paths: one direct inter-rack path plus OLT relays.
    paths = pon3.candidate_paths("srv-0-00", "srv-2-00")
    direct = [p for p in paths if not p["olt_relay"]]
    assert len(direct) == 1 and "awgr-1--awgr-2" in direct[0]["links"]
    assert any(p["olt_relay"] for p in paths)

    # M/M/1 table values.
    assert close(ponfab.mm1_delay(0.2, 1.0), 15.0)
    assert close(ponfab.mm1_delay(0.4, 1.0), 20.0)
    assert abs(ponfab.mm1_delay(0.2, 8600.0) - 0.00139538) < 5e-9
    assert math.isinf(ponfab.mm1_delay(1.0, 1.0))
    assert close(ponfab.server_power(True, 0.0, 0.0), 203.5)
    assert close(ponfab.olt_power(True, 0.0), 60.0)
    assert close(ponfab.olt_power(True, 8600.0), 1940.0)

    # Paired demand sets give NF power/delay parity across architectures.
    results = {}
    for arch, topo in [("pon3", pon3), ("two-tier", two_tier)]:
        demands = ponfab.generate_demands(seed=42, arch=arch)
        assert len(demands) == 16
        problem = ponfab.formulate(topo, demands)
        solution = problem.solve()
        assert solution.status == "optimal"
        assert problem.verify(solution) == []
        assert solution.active_olts == []
        results[arch] = (
            problem.power(solution)["total_w"],
            problem.delay(solution)["mean_us"],
        )
    assert close(results["pon3"][0], results["two-tier"][0], 1e-6)
    assert close(results["pon3"][1], results["two-tier"][1], 1e-6)

    # An inter-AWGR failure forces the OLT on pon3; power rises by exactly
    # the OLT terms.
    demands = ponfab.generate_demands(seed=42, arch="pon3")
    nf_problem = ponfab.formulate(pon3, demands)
    nf_power = nf_problem.power(nf_problem.solve())["total_w"]
    scenario = ponfab.Scenario.custom("cut", ["awgr-1--awgr-2"])
    failed = pon3.apply_failure(scenario)
    problem = ponfab.formulate(failed, demands)
    solution = problem.solve()
    assert solution.status == "optimal"
    fwd = solution.total_olt_forwarded_gbps()
    assert fwd > 0.0
    assert close(
        problem.power(solution)["total_w"] - nf_power,
        ponfab.olt_power(True, fwd),
        1e-9,
    )
    # The exhaustive oracle agrees with the branch-and-bound (on a problem
    # small enough for full enumeration).
    bounded = ponfab.formulate(failed, demands, max_paths=2)
    assert bounded.brute_force().objective_w == bounded.solve().objective_w

    # A server uplink failure kills its sourced demand.
    f1 = pon3.enumerate_single_failures("F1")[0]
    report = pon3.down_analysis(f1, demands)
    assert not report["survivable"] and len(report["dead_demands"]) >= 1

    # The sweep emits 12 aggregated rows and byte-stable CSV files.
    with tempfile.TemporaryDirectory() as tmp:
        rows = ponfab.sweep(out_dir=tmp, seed=42, jobs=2)
        assert len(rows) == 12
        by_label = {(r["architecture"], r["label"]): r for r in rows}
        assert by_label[("pon3", "F1")]["status"] == "partial"
        assert by_label[("pon3", "F3")]["total_w"] > by_label[("pon3", "NF")]["total_w"]
        assert close(
            by_label[("two-tier", "F3")]["total_w"],
            by_label[("two-tier", "NF")]["total_w"],
            0.0,
        )
        first = (pathlib.Path(tmp) / "results.csv").read_bytes()
        ponfab.sweep(out_dir=tmp, seed=42, jobs=1)
        assert (pathlib.Path(tmp) / "results.csv").read_bytes() == first

    print("ponfab smoke test passed")


if __name__ == "__main__":
    main()
