"""FastAPI service exposing the simulation pipeline.

The CLI is a thin client of these endpoints; they are also usable as a
long-running service for multi-client setups.
"""

from __future__ import annotations

from typing import Optional

from fastapi import FastAPI
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from . import __version__
from .link import ZeroRateError
from .optimizer import InfeasibleError, SolverOptions
from .pipeline import (access_compare, access_csv, baselines_csv,
                       compare_baselines, run_artifacts, run_pipeline,
                       sweep_csv, sweep_power)
from .scenario import (ScenarioError, generate_synthetic_layout, load_scenario,
                       serialize_scenario)

app = FastAPI(title="fbs-sim", version=__version__)


class SolverOptionsModel(BaseModel):
    max_outer_iterations: int = Field(default=40, ge=1)
    convergence_tol: float = Field(default=1e-5, gt=0)
    inner_subproblem_tol: float = Field(default=1e-10, gt=0)
    inner_max_iters: int = Field(default=40, ge=1)
    bisection_rel_tol: float = Field(default=1e-8, gt=0)
    bisection_max_steps: int = Field(default=60, ge=1)
    step0: float = Field(default=1.0, gt=0)
    seed: int = 0

    def to_options(self) -> SolverOptions:
        return SolverOptions(**self.model_dump())


class RunRequest(BaseModel):
    scenario: dict
    seed: Optional[int] = None
    options: SolverOptionsModel = SolverOptionsModel()


class RunResponse(BaseModel):
    latency: dict
    manifest: dict
    artifacts: dict


class PowerSweepRequest(BaseModel):
    scenario: dict
    power_dbm: list[float]
    seed: Optional[int] = None
    options: SolverOptionsModel = SolverOptionsModel()


class BaselineRequest(BaseModel):
    scenario: dict
    seed: Optional[int] = None
    baseline: str = "all"
    options: SolverOptionsModel = SolverOptionsModel()


class AccessRequest(BaseModel):
    scenario: dict


class TableResponse(BaseModel):
    rows: list[dict]
    csv: str


class GenerateRequest(BaseModel):
    n_turbines: int = Field(ge=1)
    n_waypoints: int = Field(ge=1)
    width_m: float = Field(gt=0)
    height_m: float = Field(gt=0)
    seed: int = 0


@app.exception_handler(ScenarioError)
async def _scenario_error(request, exc):
    return JSONResponse(status_code=400,
                        content={"error": "invalid_scenario", "detail": str(exc)})


@app.exception_handler(InfeasibleError)
async def _infeasible_error(request, exc):
    return JSONResponse(status_code=409,
                        content={"error": "infeasible_threshold",
                                 "detail": str(exc),
                                 "turbines": exc.turbines,
                                 "waypoint": exc.waypoint})


@app.exception_handler(ZeroRateError)
async def _zero_rate_error(request, exc):
    return JSONResponse(status_code=409,
                        content={"error": "zero_rate",
                                 "detail": str(exc),
                                 "turbines": exc.turbine_indices})


@app.get("/health")
def health():
    return {"status": "ok", "version": __version__}


@app.post("/run", response_model=RunResponse)
def run(req: RunRequest):
    config = load_scenario(req.scenario)
    options = req.options.to_options()
    result = run_pipeline(config, seed=req.seed, options=options)
    artifacts = run_artifacts(result, options)
    import json as _json
    return RunResponse(latency=result.breakdown.as_dict(),
                       manifest=_json.loads(artifacts["manifest.json"]),
                       artifacts=artifacts)


@app.post("/sweep/power", response_model=TableResponse)
def power_sweep(req: PowerSweepRequest):
    config = load_scenario(req.scenario)
    rows = sweep_power(config, req.power_dbm, seed=req.seed,
                       options=req.options.to_options())
    return TableResponse(rows=rows, csv=sweep_csv(rows))


@app.post("/baselines/compare", response_model=TableResponse)
def baselines(req: BaselineRequest):
    config = load_scenario(req.scenario)
    rows, _ = compare_baselines(config, seed=req.seed,
                                options=req.options.to_options(),
                                which=req.baseline)
    return TableResponse(rows=rows, csv=baselines_csv(rows))


@app.post("/access/compare", response_model=TableResponse)
def access(req: AccessRequest):
    config = load_scenario(req.scenario)
    rows = access_compare(config)
    return TableResponse(rows=rows, csv=access_csv(rows))


@app.post("/scenario/generate")
def generate(req: GenerateRequest):
    import json as _json
    config = generate_synthetic_layout(req.n_turbines, req.n_waypoints,
                                       (req.width_m, req.height_m), req.seed)
    return {"scenario": _json.loads(serialize_scenario(config))}
