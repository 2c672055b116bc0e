import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize

from swboost.booster import StageObjective
from swboost.boxsolver import SolverError, SolverSettings, minimize_box, projected_gradient_norm


def quadratic(center, scale=None):
    center = np.asarray(center, dtype=float)
    scale = np.ones_like(center) if scale is None else np.asarray(scale, dtype=float)

    def fun(x):
        d = x - center
        return float(np.sum(scale * d * d)), 2 * scale * d
    return fun


def test_interior_optimum():
    rep = minimize_box(quadratic([1, 1, 1]), np.zeros(3))
    np.testing.assert_allclose(rep.minimizer, 1.0, atol=1e-5)
    assert rep.termination == "gradient_tol"


def test_boundary_optimum():
    rep = minimize_box(quadratic([-1, -1]), np.array([2.0, 2.0]))
    np.testing.assert_array_equal(rep.minimizer, [0.0, 0.0])


def test_mixed_active_set_matches_scipy():
    rng = np.random.default_rng(0)
    A = rng.normal(size=(30, 8))
    b = rng.normal(size=30)

    def fun(x):
        r = A @ x - b
        return float(r @ r), 2 * A.T @ r

    tight = SolverSettings(max_iterations=500, projected_gradient_tol=1e-10,
                           objective_decrease_tol=1e-15)
    ours = minimize_box(fun, np.zeros(8), tight)
    ref = minimize(fun, np.zeros(8), jac=True, method="L-BFGS-B", bounds=[(0, None)] * 8,
                   options={"ftol": 1e-15, "gtol": 1e-12})
    assert ours.objective == pytest.approx(ref.fun, rel=1e-9)
    np.testing.assert_allclose(ours.minimizer, ref.x, atol=1e-5)


def test_iteration_cap():
    rep = minimize_box(quadratic(np.arange(1, 21), np.logspace(0, 4, 20)), np.zeros(20),
                       SolverSettings(max_iterations=2))
    assert rep.iterations == 2
    assert rep.termination == "max_iter"


def test_non_finite_objective_raises():
    def fun(x):
        return np.nan, np.zeros_like(x)
    with pytest.raises(SolverError):
        minimize_box(fun, np.zeros(2))


def test_infeasible_start_rejected():
    with pytest.raises(ValueError):
        minimize_box(quadratic([1.0]), np.array([-1.0]))


@pytest.mark.parametrize("kwargs", [
    {"max_iterations": 0}, {"projected_gradient_tol": 0.0},
    {"objective_decrease_tol": -1.0}, {"memory_pairs": 0},
])
def test_settings_validation(kwargs):
    with pytest.raises(ValueError):
        SolverSettings(**kwargs)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 12))
def test_iterates_feasible_and_monotone(seed, q):
    rng = np.random.default_rng(seed)
    center = rng.normal(size=q) * 3
    scale = rng.uniform(0.01, 100, size=q)
    base = quadratic(center, scale)
    accepted = []

    def fun(x):
        assert np.all(x >= 0)
        value, grad = base(x)
        accepted.append(value)
        return value, grad

    x0 = np.abs(rng.normal(size=q))
    rep = minimize_box(fun, x0)
    assert rep.objective <= base(x0)[0]
    assert np.all(rep.minimizer >= 0)
    expected = np.maximum(center, 0)
    if rep.termination == "gradient_tol":
        assert projected_gradient_norm(rep.minimizer, base(rep.minimizer)[1]) <= 1e-5
        np.testing.assert_allclose(rep.minimizer, expected, atol=1e-5 / scale.min() + 1e-9)


def test_accepted_iterates_never_increase():
    # The solver is deterministic, so capping it at 1, 2, ... iterations
    # replays the sequence of accepted iterates.
    rng = np.random.default_rng(3)
    A = rng.normal(size=(20, 6))
    b = rng.normal(size=20)

    def fun(x):
        r = A @ x - b
        return float(r @ r), 2 * A.T @ r

    values = [minimize_box(fun, np.zeros(6), SolverSettings(max_iterations=cap)).objective
              for cap in range(1, 30)]
    assert all(b <= a + 1e-12 for a, b in zip(values, values[1:]))


def _grid_values(grid, log_cache, h, labels, nu):
    # Direct evaluation of log sum_{i,r} u_ir exp(-h_i (w_{y_i} - w_r)) + nu |w|_1
    # over a batch of candidate rows.
    y0 = labels - 1
    diff = grid[:, y0][:, :, None] - grid[:, None, :]  # (g, m, k)
    a = log_cache[None] - h[None, :, None] * diff
    top = a.max(axis=(1, 2), keepdims=True)
    lse = np.log(np.exp(a - top).sum(axis=(1, 2))) + top[:, 0, 0]
    return lse + nu * grid.sum(axis=1)


def test_stage_objective_matches_grid_search():
    rng = np.random.default_rng(8)
    m, k, nu = 5, 3, 0.05
    labels = np.array([1, 2, 3, 1, 2])
    h = np.array([1.0, -1.0, 1.0, -1.0, 1.0])
    log_cache = np.log(rng.dirichlet(np.ones(m * k)).reshape(m, k))
    rep = minimize_box(StageObjective(log_cache, h, labels, nu, "exp"), np.zeros(k))

    axis = np.linspace(0.0, 5.0, 101)
    grid = np.stack(np.meshgrid(axis, axis, axis, indexing="ij"), -1).reshape(-1, 3)
    values = _grid_values(grid, log_cache, h, labels, nu)
    centre = grid[np.argmin(values)]
    fine = np.linspace(-0.05, 0.05, 41)
    local = centre + np.stack(np.meshgrid(fine, fine, fine, indexing="ij"), -1).reshape(-1, 3)
    local = local[np.all(local >= 0, axis=1)]
    best = min(values.min(), _grid_values(local, log_cache, h, labels, nu).min())
    assert abs(rep.objective - best) <= 1e-3
    assert rep.objective <= best + 1e-9
