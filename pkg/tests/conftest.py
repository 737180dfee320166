"""Shared fixtures: a desk-scale scenario suite reused across test modules."""

import time

import numpy as np
import pytest

from fbs_sim.optimizer import SolverOptions
from fbs_sim.pipeline import compare_baselines, run_pipeline
from fbs_sim.scenario import (ArrayGeometry, Position3D, ScenarioConfig,
                              Turbine, Waypoint, assign_turbines)

N_SUITE_SEEDS = 20


def desk_config(seed, **overrides):
    """Two waypoints, three turbines each: small enough for fast solves,
    large enough for real inter-user interference."""
    rng = np.random.default_rng(seed)
    centers = [(0.0, 0.0), (4000.0, 0.0)]
    turbines = []
    tid = 0
    for cx, cy in centers:
        for _ in range(3):
            jx, jy = rng.uniform(-400.0, 400.0, size=2)
            turbines.append(Turbine(
                id=tid,
                position=Position3D(x=cx + jx, y=cy + jy, z=190.0),
                panel=ArrayGeometry(3, 3),
            ))
            tid += 1
    waypoints = [
        Waypoint(id=j, position=Position3D(x=cx, y=cy, z=1000.0))
        for j, (cx, cy) in enumerate(centers)
    ]
    cfg = ScenarioConfig(turbines=tuple(turbines), waypoints=tuple(waypoints),
                         fbs_panel=ArrayGeometry(4, 4), rng_seed=seed,
                         **overrides)
    return assign_turbines(cfg)


@pytest.fixture(scope="session")
def suite():
    """run_pipeline on 20 seeds of the desk-scale scenario, with wall time."""
    started = time.monotonic()
    results = {}
    for seed in range(N_SUITE_SEEDS):
        cfg = desk_config(seed)
        results[seed] = run_pipeline(cfg, seed=seed, options=SolverOptions())
    elapsed = time.monotonic() - started
    return {"results": results, "elapsed_s": elapsed}


@pytest.fixture(scope="session")
def baseline_suite():
    """compare_baselines on the same 20 seeds."""
    rows = {}
    for seed in range(N_SUITE_SEEDS):
        cfg = desk_config(seed)
        rows[seed], _ = compare_baselines(cfg, seed=seed,
                                          options=SolverOptions())
    return rows
