"""End-to-end pipeline: route -> access -> optimize -> aggregate, plus the
parameter sweeps and baseline comparisons, and their CSV/JSON artifacts."""

from __future__ import annotations

import hashlib
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import __version__
from .access import waypoint_connection_time
from .channel import build_waypoint_channels
from .link import (BeamformerSet, LatencyBreakdown, PowerAllocation,
                   WaypointLatency, compute_latency, sinr_from_cross_gains,
                   total_latency, transmission_latency, downlink_cross_gains,
                   uplink_cross_gains)
from .optimizer import (DownlinkInstance, SolverOptions, UplinkInstance,
                        baseline_equal_power, baseline_omni_turbine_beams,
                        baseline_random_beams, solve_downlink_waypoint,
                        solve_uplink_waypoint)
from .routing import plan_default_mission, route_table
from .scenario import ScenarioConfig, serialize_scenario

STRATEGIES = ("proposed", "equal", "random", "omni")


def _thread_cap() -> int:
    raw = os.environ.get("FBS_SIM_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _waypoint_seed(root_seed: int, waypoint_id: int) -> int:
    ss = np.random.SeedSequence(root_seed, spawn_key=(99, waypoint_id))
    return int(ss.generate_state(1)[0])


@dataclass
class WaypointSolution:
    waypoint: int
    latency: WaypointLatency
    beams: BeamformerSet
    allocation: PowerAllocation
    uplink_rates: np.ndarray
    downlink_rates: np.ndarray
    uplink_trace: list
    downlink_trace: list
    uplink_violation: list
    downlink_violation: list


@dataclass
class RunResult:
    config: ScenarioConfig
    seed: int
    breakdown: LatencyBreakdown
    route_rows: list
    solutions: list
    runtime_s: float = 0.0


def _instances(waypoint, config: ScenarioConfig, seed, power_budget=None):
    turbines = config.waypoint_turbines(waypoint)
    h, g, _ = build_waypoint_channels(waypoint, config, seed)
    ul = UplinkInstance(
        channels=h,
        tx_power=np.array([t.uplink_tx_power for t in turbines]),
        noise=config.noise_power,
        payload_bits=np.array([t.uplink_payload_bits for t in turbines]),
        bandwidth=config.bandwidth,
        sinr_threshold=config.sinr_threshold,
    )
    dl = DownlinkInstance(
        channels=g,
        noise=config.noise_power,
        dl_payload_bits=np.array([t.downlink_payload_bits for t in turbines]),
        ul_payload_bits=np.array([t.uplink_payload_bits for t in turbines]),
        bandwidth=config.bandwidth,
        sinr_threshold=config.sinr_threshold,
        power_budget=power_budget if power_budget is not None else waypoint.power_budget,
        compute_intensity=config.compute_intensity,
        processor_coefficient=config.processor_coefficient,
    )
    return ul, dl


def solve_waypoint(waypoint, config: ScenarioConfig, seed,
                   options: SolverOptions, strategy="proposed",
                   power_budget=None, warm=None) -> WaypointSolution:
    """Optimize (or evaluate a baseline at) one waypoint."""
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}")
    ul, dl = _instances(waypoint, config, seed, power_budget)
    k_count = ul.channels.shape[0]
    n_fbs = ul.channels.shape[1]
    m_turb = ul.channels.shape[2]
    connect = waypoint_connection_time(waypoint, config)

    ul_state_trace, ul_viol = [], []
    dl_state_trace, dl_viol = [], []

    if strategy == "random":
        beams = baseline_random_beams(k_count, n_fbs, m_turb,
                                      _waypoint_seed(seed, waypoint.id))
        w_ul, v_ul = beams.fbs_uplink, beams.turbine_uplink
        w_dl, v_dl, alloc, dl_state = solve_downlink_waypoint(
            dl, options, init=(beams.turbine_downlink, beams.fbs_downlink),
            freeze_turbine_beams=True, freeze_fbs_beams=True,
            enforce_threshold=False, waypoint=waypoint.id)
        dl_state_trace, dl_viol = dl_state.objective_trace, dl_state.violation_trace
    elif strategy == "omni":
        omni = baseline_omni_turbine_beams(k_count, m_turb)
        fbs0, _ = _matched_fbs_init(ul.channels)
        w_ul, v_ul, ul_state = solve_uplink_waypoint(
            ul, options, init=(fbs0, omni), freeze_turbine_beams=True,
            enforce_threshold=False, waypoint=waypoint.id)
        gfbs0 = _matched_fbs_init_downlink(dl.channels)
        w_dl, v_dl, alloc, dl_state = solve_downlink_waypoint(
            dl, options, init=(omni, gfbs0), freeze_turbine_beams=True,
            enforce_threshold=False, waypoint=waypoint.id)
        ul_state_trace, ul_viol = ul_state.objective_trace, ul_state.violation_trace
        dl_state_trace, dl_viol = dl_state.objective_trace, dl_state.violation_trace
    elif strategy == "equal":
        w_ul, v_ul, ul_state = solve_uplink_waypoint(
            ul, options, waypoint=waypoint.id)
        fixed = baseline_equal_power(dl.power_budget, k_count)
        w_dl, v_dl, alloc, dl_state = solve_downlink_waypoint(
            dl, options, fixed_allocation=fixed, enforce_threshold=False,
            waypoint=waypoint.id)
        ul_state_trace, ul_viol = ul_state.objective_trace, ul_state.violation_trace
        dl_state_trace, dl_viol = dl_state.objective_trace, dl_state.violation_trace
    else:
        init_ul = warm.get("uplink") if warm else None
        init_dl = warm.get("downlink") if warm else None
        init_alloc = warm.get("allocation") if warm else None
        w_ul, v_ul, ul_state = solve_uplink_waypoint(
            ul, options, init=init_ul, waypoint=waypoint.id)
        w_dl, v_dl, alloc, dl_state = solve_downlink_waypoint(
            dl, options, init=init_dl, init_allocation=init_alloc,
            waypoint=waypoint.id)
        ul_state_trace, ul_viol = ul_state.objective_trace, ul_state.violation_trace
        dl_state_trace, dl_viol = dl_state.objective_trace, dl_state.violation_trace

    beams = BeamformerSet(fbs_uplink=w_ul, turbine_uplink=v_ul,
                          fbs_downlink=w_dl, turbine_downlink=v_dl)

    ul_sinr = sinr_from_cross_gains(
        uplink_cross_gains(ul.channels, w_ul, v_ul), ul.tx_power, ul.noise)
    dl_sinr = sinr_from_cross_gains(
        downlink_cross_gains(dl.channels, v_dl, w_dl),
        np.asarray(alloc.downlink), dl.noise)
    ul_rates = np.log2(1.0 + ul_sinr)
    dl_rates = np.log2(1.0 + dl_sinr)

    latency = WaypointLatency(
        waypoint=waypoint.id,
        connect=connect,
        uplink=transmission_latency(ul_rates, ul.payload_bits, ul.bandwidth),
        compute=compute_latency(alloc.compute, config.compute_intensity,
                                config.processor_coefficient, dl.ul_payload_bits),
        downlink=transmission_latency(dl_rates, dl.dl_payload_bits, dl.bandwidth),
    )
    return WaypointSolution(
        waypoint=waypoint.id, latency=latency, beams=beams, allocation=alloc,
        uplink_rates=ul_rates, downlink_rates=dl_rates,
        uplink_trace=list(ul_state_trace), downlink_trace=list(dl_state_trace),
        uplink_violation=list(ul_viol), downlink_violation=list(dl_viol))


def _matched_fbs_init(channels):
    from .optimizer import _svd_matched_init
    return _svd_matched_init(channels)


def _matched_fbs_init_downlink(channels):
    from .optimizer import _svd_matched_init
    _, right = _svd_matched_init(channels)
    return right


def run_pipeline(config: ScenarioConfig, seed=None,
                 options: SolverOptions | None = None,
                 strategy="proposed") -> RunResult:
    """Full mission: plan the route, then solve every waypoint stop."""
    started = time.monotonic()
    seed = config.rng_seed if seed is None else seed
    options = options or SolverOptions()
    route = plan_default_mission(config)
    waypoints = sorted(config.waypoints, key=lambda w: w.id)

    def work(wp):
        return solve_waypoint(wp, config, seed, options, strategy=strategy)

    cap = _thread_cap()
    if cap > 1 and len(waypoints) > 1:
        with ThreadPoolExecutor(max_workers=min(cap, len(waypoints))) as pool:
            solutions = list(pool.map(work, waypoints))
    else:
        solutions = [work(wp) for wp in waypoints]

    breakdown = total_latency(route.flight_duration,
                              [s.latency for s in solutions])
    return RunResult(config=config, seed=seed, breakdown=breakdown,
                     route_rows=route_table(route, config),
                     solutions=solutions,
                     runtime_s=time.monotonic() - started)


# ---------------------------------------------------------------------------
# Comparisons and sweeps
# ---------------------------------------------------------------------------

def compare_baselines(config: ScenarioConfig, seed=None,
                      options: SolverOptions | None = None,
                      which="all"):
    """Total latency per strategy over identical channels."""
    strategies = STRATEGIES if which == "all" else ("proposed", which)
    results = {}
    for strategy in strategies:
        results[strategy] = run_pipeline(config, seed=seed, options=options,
                                         strategy=strategy)
    rows = []
    for strategy in strategies:
        b = results[strategy].breakdown
        rows.append({
            "strategy": strategy,
            "total": b.total,
            "flight": b.flight,
            "connect": sum(w.connect for w in b.per_waypoint),
            "uplink": sum(w.uplink for w in b.per_waypoint),
            "compute": sum(w.compute for w in b.per_waypoint),
            "downlink": sum(w.downlink for w in b.per_waypoint),
        })
    return rows, results


def sweep_power(config: ScenarioConfig, power_dbm_list, seed=None,
                options: SolverOptions | None = None):
    """Re-solve the downlink at each FBS power budget, ascending, warm-started
    so cumulative latency is non-increasing in the budget by construction."""
    seed = config.rng_seed if seed is None else seed
    options = options or SolverOptions()
    route = plan_default_mission(config)
    waypoints = sorted(config.waypoints, key=lambda w: w.id)
    cumulative_flight = {r["waypoint"]: r["cumulative_time"]
                         for r in route_table(route, config)}

    rows = []
    warm = {wp.id: None for wp in waypoints}
    for dbm in sorted(power_dbm_list):
        budget = 10.0 ** ((dbm - 30.0) / 10.0)
        stop_latencies = {}
        for wp in waypoints:
            wcfg = replace(wp, power_budget=budget)
            sol = solve_waypoint(wcfg, config, seed, options,
                                 strategy="proposed", power_budget=budget,
                                 warm=warm[wp.id])
            warm[wp.id] = {
                "uplink": (sol.beams.fbs_uplink, sol.beams.turbine_uplink),
                "downlink": (sol.beams.turbine_downlink, sol.beams.fbs_downlink),
                "allocation": sol.allocation,
            }
            stop_latencies[wp.id] = sol.latency.stop_total
        cum = 0.0
        for wp in waypoints:
            cum += stop_latencies[wp.id]
            rows.append({
                "waypoint": wp.id,
                "power_dbm": float(dbm),
                "cumulative_latency": cumulative_flight.get(wp.id, 0.0) + cum,
            })
    rows.sort(key=lambda r: (r["waypoint"], r["power_dbm"]))
    return rows


def access_compare(config: ScenarioConfig):
    """Per-waypoint connection time under the 4-step and 2-step procedures."""
    rows = []
    for wp in sorted(config.waypoints, key=lambda w: w.id):
        rows.append({
            "waypoint": wp.id,
            "rap": waypoint_connection_time(wp, config, "rap"),
            "edt": waypoint_connection_time(wp, config, "edt"),
        })
    return rows


# ---------------------------------------------------------------------------
# Artifact rendering
# ---------------------------------------------------------------------------

def _fmt(value):
    if isinstance(value, float):
        return repr(value)
    return str(value)


def render_csv(header, units, rows):
    """CSV text with a header row and a units row; deterministic."""
    lines = [",".join(header), ",".join(units)]
    for row in rows:
        lines.append(",".join(_fmt(row[h]) for h in header))
    return "\n".join(lines) + "\n"


def latency_csv(breakdown: LatencyBreakdown) -> str:
    header = ["segment", "connect", "uplink", "compute", "downlink", "total"]
    units = ["id", "s", "s", "s", "s", "s"]
    rows = []
    for w in breakdown.per_waypoint:
        rows.append({"segment": f"waypoint_{w.waypoint}", "connect": w.connect,
                     "uplink": w.uplink, "compute": w.compute,
                     "downlink": w.downlink, "total": w.stop_total})
    rows.append({"segment": "flight", "connect": 0.0, "uplink": 0.0,
                 "compute": 0.0, "downlink": 0.0, "total": breakdown.flight})
    rows.append({"segment": "total",
                 "connect": sum(w.connect for w in breakdown.per_waypoint),
                 "uplink": sum(w.uplink for w in breakdown.per_waypoint),
                 "compute": sum(w.compute for w in breakdown.per_waypoint),
                 "downlink": sum(w.downlink for w in breakdown.per_waypoint),
                 "total": breakdown.total})
    return render_csv(header, units, rows)


def convergence_csv(result: RunResult) -> str:
    header = ["waypoint", "phase", "iteration", "objective", "max_violation"]
    units = ["id", "-", "count", "s", "relative"]
    rows = []
    for sol in result.solutions:
        for phase, trace, viol in (("uplink", sol.uplink_trace, sol.uplink_violation),
                                   ("downlink", sol.downlink_trace, sol.downlink_violation)):
            for i, obj in enumerate(trace, start=1):
                rows.append({"waypoint": sol.waypoint, "phase": phase,
                             "iteration": i, "objective": obj,
                             "max_violation": viol[i - 1] if i <= len(viol) else 0.0})
    return render_csv(header, units, rows)


def route_csv(result: RunResult) -> str:
    header = ["waypoint", "x", "y", "cumulative_distance", "cumulative_time"]
    units = ["id", "m", "m", "m", "s"]
    return render_csv(header, units, result.route_rows)


def sweep_csv(rows) -> str:
    return render_csv(["waypoint", "power_dbm", "cumulative_latency"],
                      ["id", "dBm", "s"], rows)


def baselines_csv(rows) -> str:
    return render_csv(
        ["strategy", "total", "flight", "connect", "uplink", "compute", "downlink"],
        ["-", "s", "s", "s", "s", "s", "s"], rows)


def access_csv(rows) -> str:
    return render_csv(["waypoint", "rap", "edt"], ["id", "s", "s"], rows)


def scenario_digest(config: ScenarioConfig) -> str:
    return hashlib.sha256(serialize_scenario(config).encode()).hexdigest()


def build_manifest(config: ScenarioConfig, seed, options: SolverOptions,
                   runtime_s, outputs) -> dict:
    return {
        "scenario_digest": scenario_digest(config),
        "seed": int(seed),
        "solver_options": asdict(options),
        "artifact_version": __version__,
        "runtime_s": runtime_s,
        "outputs": list(outputs),
    }


def run_artifacts(result: RunResult, options: SolverOptions) -> dict:
    """All cmd_run output files as {name: text}."""
    artifacts = {
        "latency.json": json.dumps(result.breakdown.as_dict(), indent=2) + "\n",
        "latency.csv": latency_csv(result.breakdown),
        "convergence.csv": convergence_csv(result),
        "route.csv": route_csv(result),
    }
    manifest = build_manifest(result.config, result.seed, options,
                              result.runtime_s,
                              sorted(artifacts) + ["manifest.json"])
    artifacts["manifest.json"] = json.dumps(manifest, indent=2) + "\n"
    return artifacts
