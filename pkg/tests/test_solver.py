import numpy as np
import pytest

from fbs_sim.solver import (Constraint, ConvexSubproblem, bisect_max_feasible,
                            convex_subproblem_solve, project_unit_balls,
                            projected_ascent, softmin_weights)


def test_project_unit_balls_row_wise():
    x = np.array([[3.0, 4.0], [0.3, 0.4]])
    p = project_unit_balls(x)
    np.testing.assert_allclose(p[0], [0.6, 0.8])
    np.testing.assert_allclose(p[1], [0.3, 0.4])  # interior points untouched


def test_softmin_weights_concentrate_on_minimum():
    w = softmin_weights(np.array([0.0, 5.0, 10.0]))
    assert w.sum() == pytest.approx(1.0)
    assert w[0] > 0.9
    w_tied = softmin_weights(np.array([1.0, 1.0]))
    np.testing.assert_allclose(w_tied, [0.5, 0.5])


def test_projected_ascent_linear_objective_hits_boundary():
    c = np.array([[1.0, 2.0, 2.0]])
    res = projected_ascent(lambda x: float(np.sum(c * x)),
                           lambda x: c, np.zeros((1, 3)))
    # max of c.x on the unit ball is ||c|| at x = c/||c||
    assert res.objective == pytest.approx(3.0, rel=1e-6)
    np.testing.assert_allclose(res.x[0], c[0] / 3.0, atol=1e-4)


def test_projected_ascent_concave_quadratic_interior_optimum():
    target = np.array([[0.2, -0.3]])
    res = projected_ascent(lambda x: -float(np.sum((x - target) ** 2)),
                           lambda x: -2.0 * (x - target),
                           np.array([[0.9, 0.1]]))
    assert res.objective == pytest.approx(0.0, abs=1e-10)
    np.testing.assert_allclose(res.x, target, atol=1e-5)


def test_projected_ascent_never_decreases():
    rng = np.random.default_rng(4)
    a = rng.standard_normal((3, 3))
    q = a @ a.T + np.eye(3)

    def f(x):
        return -float(x[0] @ q @ x[0])

    def g(x):
        return -2.0 * (q @ x[0])[None, :]

    x0 = project_unit_balls(rng.standard_normal((1, 3)))
    res = projected_ascent(f, g, x0, max_iters=50)
    assert res.objective >= f(x0)


def test_projected_ascent_stop_at_short_circuits():
    calls = []

    def f(x):
        calls.append(1)
        return 1.0

    res = projected_ascent(f, lambda x: np.ones_like(x),
                           np.zeros((1, 2)), stop_at=0.5)
    assert res.converged
    assert len(calls) == 1


def test_convex_subproblem_with_constraint():
    # maximize x . d on the unit ball subject to x[0] <= 0.5
    d = np.array([[1.0, 0.0]])
    problem = ConvexSubproblem(
        objective=lambda x: float(np.sum(d * x)),
        gradient=lambda x: d,
        x0=np.zeros((1, 2)),
        constraints=[Constraint(value=lambda x: 0.5 - x[0, 0],
                                gradient=lambda x: np.array([[-1.0, 0.0]]))])
    res = convex_subproblem_solve(problem, tol=1e-9)
    assert res.feasible
    assert res.x[0, 0] <= 0.5 + 1e-6
    assert res.objective == pytest.approx(0.5, abs=1e-3)


def test_convex_subproblem_reports_infeasibility():
    # x[0] >= 2 is impossible on the unit ball
    problem = ConvexSubproblem(
        objective=lambda x: 0.0,
        gradient=lambda x: np.zeros((1, 2)),
        x0=np.zeros((1, 2)),
        constraints=[Constraint(value=lambda x: x[0, 0] - 2.0,
                                gradient=lambda x: np.array([[1.0, 0.0]]))])
    res = convex_subproblem_solve(problem, tol=1e-9)
    assert not res.feasible
    assert res.max_violation >= 1.0 - 1e-6


def test_bisect_max_feasible_scalar_threshold():
    best, payload = bisect_max_feasible(
        0.0, 10.0, lambda t: (t <= 3.25, t), rel_tol=1e-10)
    assert best == pytest.approx(3.25, rel=1e-8)
    assert payload == pytest.approx(best)


def test_bisect_requires_feasible_lower_bracket():
    with pytest.raises(ValueError):
        bisect_max_feasible(1.0, 2.0, lambda t: (False, None))
