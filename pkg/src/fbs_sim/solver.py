"""Small self-contained solvers: projected-gradient ascent on ball-constrained
problems, max-min helpers, and scalar bisection over a monotone feasibility
oracle. These back every convex subproblem in the optimizer."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np


def project_unit_balls(x: np.ndarray) -> np.ndarray:
    """Project each row of x onto the closed unit 2-norm ball."""
    norms = np.linalg.norm(x, axis=-1, keepdims=True)
    return x / np.maximum(norms, 1.0)


def softmin_weights(values: np.ndarray) -> np.ndarray:
    """Weights concentrated on the (near-)active minimum components."""
    values = np.asarray(values, dtype=float)
    spread = float(values.max() - values.min())
    temp = max(spread / 10.0, 1e-12 + 1e-9 * abs(float(values.min())))
    w = np.exp((values.min() - values) / temp)
    return w / w.sum()


@dataclass
class AscentResult:
    x: np.ndarray
    objective: float
    iterations: int
    converged: bool


def projected_ascent(f: Callable, grad: Callable, x0: np.ndarray,
                     project: Callable = project_unit_balls,
                     max_iters: int = 60, tol: float = 1e-9,
                     step0: float = 1.0,
                     stop_at: Optional[float] = None) -> AscentResult:
    """Monotone projected-gradient ascent with backtracking.

    Only improving steps are accepted, so the returned objective is never
    below f(x0). `stop_at` allows feasibility oracles to exit as soon as a
    target value is reached.
    """
    x = project(np.array(x0, copy=True))
    fx = f(x)
    step = step0
    stalls = 0
    it = 0
    for it in range(1, max_iters + 1):
        if stop_at is not None and fx >= stop_at:
            return AscentResult(x=x, objective=fx, iterations=it, converged=True)
        g = grad(x)
        gnorm = float(np.linalg.norm(g))
        if gnorm < 1e-15:
            return AscentResult(x=x, objective=fx, iterations=it, converged=True)
        improved = False
        trial_step = step
        for _ in range(25):
            cand = project(x + trial_step * g)
            fc = f(cand)
            if fc > fx + 1e-15 * (1.0 + abs(fx)):
                gain = fc - fx
                x, fx = cand, fc
                step = trial_step * 1.5
                improved = True
                if gain < tol * (1.0 + abs(fx)):
                    stalls += 1
                else:
                    stalls = 0
                break
            trial_step *= 0.5
        if not improved or stalls >= 3:
            return AscentResult(x=x, objective=fx, iterations=it,
                                converged=not improved or stalls >= 3)
    return AscentResult(x=x, objective=fx, iterations=it, converged=False)


# ---------------------------------------------------------------------------
# General ball-constrained convex subproblem
# ---------------------------------------------------------------------------

@dataclass
class Constraint:
    """Scalar inequality slack(x) >= 0 with ascent gradient of the slack."""
    value: Callable
    gradient: Callable


@dataclass
class ConvexSubproblem:
    """Maximize a concave objective over per-row unit balls, with optional
    extra inequality constraints (affine or concave slack)."""
    objective: Callable
    gradient: Callable
    x0: np.ndarray
    project: Callable = project_unit_balls
    constraints: list = field(default_factory=list)


@dataclass
class SubproblemResult:
    x: np.ndarray
    objective: float
    max_violation: float
    feasible: bool
    converged: bool
    iterations: int


def convex_subproblem_solve(problem: ConvexSubproblem, tol: float = 1e-9,
                            max_iters: int = 200) -> SubproblemResult:
    cons = problem.constraints

    def min_slack(x):
        return min((float(c.value(x)) for c in cons), default=float("inf"))

    x = problem.project(np.array(problem.x0, copy=True))
    iters = 0

    if cons:
        # Phase 1: drive the worst slack nonnegative.
        def feas_obj(x):
            return min_slack(x)

        def feas_grad(x):
            vals = np.array([float(c.value(x)) for c in cons])
            weights = softmin_weights(vals)
            g = np.zeros_like(x)
            for w, c in zip(weights, cons):
                g = g + w * c.gradient(x)
            return g

        res = projected_ascent(feas_obj, feas_grad, x, problem.project,
                               max_iters=max_iters, tol=tol, stop_at=tol)
        x, iters = res.x, res.iterations
        if min_slack(x) < -tol:
            return SubproblemResult(
                x=x, objective=float(problem.objective(x)),
                max_violation=-min_slack(x), feasible=False,
                converged=res.converged, iterations=iters)

    # Phase 2: exact-penalty ascent on the objective.
    scale = max(1.0, abs(float(problem.objective(x))))
    rho = 10.0 * scale / max(tol, 1e-12)

    def merit(x):
        pen = sum(max(0.0, -float(c.value(x))) for c in cons)
        return float(problem.objective(x)) - rho * pen

    def merit_grad(x):
        g = problem.gradient(x)
        for c in cons:
            if float(c.value(x)) < 0:
                g = g + rho * c.gradient(x)
        return g

    res = projected_ascent(merit, merit_grad, x, problem.project,
                           max_iters=max_iters, tol=tol)
    violation = max((max(0.0, -float(c.value(res.x))) for c in cons), default=0.0)
    return SubproblemResult(
        x=res.x, objective=float(problem.objective(res.x)),
        max_violation=violation, feasible=violation <= tol,
        converged=res.converged, iterations=iters + res.iterations)


# ---------------------------------------------------------------------------
# Scalar bisection over a monotone feasibility oracle
# ---------------------------------------------------------------------------

def bisect_max_feasible(lo: float, hi: float, oracle: Callable,
                        rel_tol: float = 1e-8, max_steps: int = 60):
    """Largest t in [lo, hi] with oracle(t) feasible.

    `oracle(t)` returns (feasible, payload); feasibility must be monotone
    (feasible below some threshold). `lo` is assumed feasible; its payload
    is recomputed so the caller always gets one back.
    """
    feasible, payload = oracle(lo)
    if not feasible:
        raise ValueError("bisection lower bracket must be feasible")
    best_t = lo
    for _ in range(max_steps):
        if hi - best_t <= rel_tol * max(abs(best_t), 1e-30):
            break
        mid = 0.5 * (best_t + hi)
        ok, pay = oracle(mid)
        if ok:
            best_t, payload = mid, pay
        else:
            hi = mid
    return best_t, payload
