import json

import numpy as np
import pytest

from fbs_sim.optimizer import SolverOptions
from fbs_sim.pipeline import (STRATEGIES, access_compare, access_csv,
                              baselines_csv, compare_baselines,
                              convergence_csv, latency_csv, run_artifacts,
                              run_pipeline, scenario_digest, sweep_csv,
                              sweep_power)
from fbs_sim.scenario import serialize_scenario

from conftest import desk_config


@pytest.fixture(scope="module")
def run():
    cfg = desk_config(1)
    return cfg, run_pipeline(cfg, seed=7, options=SolverOptions())


def test_rerun_is_byte_identical(run):
    cfg, first = run
    second = run_pipeline(cfg, seed=7, options=SolverOptions())
    a = run_artifacts(first, SolverOptions())
    b = run_artifacts(second, SolverOptions())
    for name in ("latency.json", "latency.csv", "convergence.csv", "route.csv"):
        assert a[name] == b[name]
    # manifests agree on everything except measured runtime
    ma, mb = json.loads(a["manifest.json"]), json.loads(b["manifest.json"])
    ma.pop("runtime_s"), mb.pop("runtime_s")
    assert ma == mb


def test_seed_changes_solutions(run):
    cfg, first = run
    other = run_pipeline(cfg, seed=8, options=SolverOptions())
    assert other.breakdown.total != first.breakdown.total


def test_breakdown_is_self_consistent(run):
    _, res = run
    b = res.breakdown
    assert b.total == pytest.approx(
        b.flight + sum(w.stop_total for w in b.per_waypoint), rel=1e-12)
    assert len(b.per_waypoint) == 2
    for sol in res.solutions:
        sol.beams.validate()
        assert np.all(sol.uplink_rates > 0)
        assert np.all(sol.downlink_rates > 0)


def test_csv_artifacts_have_header_and_units(run):
    _, res = run
    art = run_artifacts(res, SolverOptions())
    for name in ("latency.csv", "convergence.csv", "route.csv"):
        lines = art[name].strip().split("\n")
        assert len(lines) >= 3
        header, units = lines[0].split(","), lines[1].split(",")
        assert len(header) == len(units)
        assert art[name].endswith("\n")
    latency_lines = art["latency.csv"].strip().split("\n")
    assert latency_lines[-1].startswith("total,")
    manifest = json.loads(art["manifest.json"])
    assert manifest["scenario_digest"] == scenario_digest(res.config)
    assert manifest["seed"] == 7


def test_all_strategies_run_and_proposed_wins():
    cfg = desk_config(2)
    rows, results = compare_baselines(cfg, seed=2, options=SolverOptions())
    assert [r["strategy"] for r in rows] == list(STRATEGIES)
    stop = {r["strategy"]: r["total"] - r["flight"] for r in rows}
    for other in ("equal", "random", "omni"):
        assert stop["proposed"] <= stop[other] + 1e-9
    text = baselines_csv(rows)
    assert text.splitlines()[0].startswith("strategy,")


def test_single_baseline_selection():
    cfg = desk_config(2)
    rows, _ = compare_baselines(cfg, seed=2, options=SolverOptions(),
                                which="equal")
    assert [r["strategy"] for r in rows] == ["proposed", "equal"]


def test_sweep_power_rows_and_monotonicity():
    cfg = desk_config(1)
    powers = [36.0, 40.0, 44.0]
    rows = sweep_power(cfg, powers, seed=1, options=SolverOptions())
    assert len(rows) == len(powers) * len(cfg.waypoints)
    by_wp = {}
    for r in rows:
        by_wp.setdefault(r["waypoint"], []).append(
            (r["power_dbm"], r["cumulative_latency"]))
    for vals in by_wp.values():
        vals.sort()
        lats = [v for _, v in vals]
        assert all(lats[i + 1] <= lats[i] + 1e-9 for i in range(len(lats) - 1))
    assert sweep_csv(rows).splitlines()[0] == "waypoint,power_dbm,cumulative_latency"


def test_access_compare_rap_doubles_edt():
    cfg = desk_config(0)
    rows = access_compare(cfg)
    assert len(rows) == 2
    for r in rows:
        assert r["rap"] == pytest.approx(2.0 * r["edt"], rel=1e-12)
    assert access_csv(rows).splitlines()[0] == "waypoint,rap,edt"


def test_scenario_digest_tracks_content():
    a = desk_config(0)
    b = desk_config(0)
    c = desk_config(1)
    assert scenario_digest(a) == scenario_digest(b)
    assert scenario_digest(a) != scenario_digest(c)
    assert scenario_digest(a) == scenario_digest(a)
    assert len(scenario_digest(a)) == 64


def test_latency_csv_totals_add_up(run):
    _, res = run
    text = latency_csv(res.breakdown)
    lines = text.strip().split("\n")
    total_row = lines[-1].split(",")
    assert float(total_row[-1]) == pytest.approx(res.breakdown.total, rel=1e-12)


def test_convergence_csv_traces_non_increasing(run):
    _, res = run
    text = convergence_csv(res)
    rows = [line.split(",") for line in text.strip().split("\n")[2:]]
    series = {}
    for wp, phase, it, obj, viol in rows:
        series.setdefault((wp, phase), []).append(float(obj))
    for trace in series.values():
        assert all(trace[i + 1] <= trace[i] + 1e-9
                   for i in range(len(trace) - 1))
