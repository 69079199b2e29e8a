import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cellid.errors import InvalidArgumentError, InvalidStartError, MultiStartError, ProbeError
from cellid.optimize import (PENALTY_ACTIVE, FitProblem, SolverOptions, finite_diff_jacobian,
                             latin_hypercube_starts, multi_start, solve_least_squares)


def _linear(seed=0, m=40, n=5):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((m, n))
    b = rng.standard_normal(m)
    return a, b


def test_linear_least_squares_matches_normal_equations():
    a, b = _linear()
    exact = np.linalg.solve(a.T @ a, a.T @ b)
    prob = FitProblem(lambda x: a @ x - b, np.zeros(5), -np.inf, np.inf, scaling=np.ones(5))
    res = solve_least_squares(prob)
    assert np.max(np.abs(res.x_opt - exact)) < 1e-8
    assert res.cost == pytest.approx(float(np.sum((a @ exact - b) ** 2)), rel=1e-12)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10_000), n=st.integers(1, 6))
def test_linear_oracle_property(seed, n):
    a, b = _linear(seed, 30, n)
    exact = np.linalg.lstsq(a, b, rcond=None)[0]
    res = solve_least_squares(FitProblem(lambda x: a @ x - b, np.ones(n), -1e6, 1e6, scaling=np.ones(n)))
    assert np.max(np.abs(res.x_opt - exact)) < 1e-8 * max(1.0, np.max(np.abs(exact)))


def test_active_bound_projection():
    # unconstrained optimum (2, -3); box [0, 1] x [-1, 1] -> (1, -1)
    prob = FitProblem(lambda x: np.array([x[0] - 2.0, x[1] + 3.0]), [0.5, 0.0], [0.0, -1.0], [1.0, 1.0])
    res = solve_least_squares(prob)
    assert np.allclose(res.x_opt, [1.0, -1.0], atol=1e-12)
    # one active, one free
    prob = FitProblem(lambda x: np.array([x[0] - 2.0, x[1] - 0.25]), [0.5, 0.0], [0.0, -1.0], [1.0, 1.0])
    res = solve_least_squares(prob)
    assert res.x_opt[0] == 1.0 and res.x_opt[1] == pytest.approx(0.25, abs=1e-10)


def test_bounds_respected_at_every_iterate():
    seen = []

    def fun(x):
        seen.append(x.copy())
        return np.array([10 * (x[1] - x[0] ** 2), 1 - x[0]])

    lo, hi = np.array([-1.5, -0.5]), np.array([0.8, 2.0])
    solve_least_squares(FitProblem(fun, [-1.2, 1.0], lo, hi))
    pts = np.array(seen)
    assert np.all(pts >= lo - 1e-15) and np.all(pts <= hi + 1e-15)


def test_rosenbrock_converges():
    prob = FitProblem(lambda x: np.array([10 * (x[1] - x[0] ** 2), 1 - x[0]]), [-1.2, 1.0], -5, 5,
                      scaling=np.ones(2))
    res = solve_least_squares(prob)
    assert np.allclose(res.x_opt, [1.0, 1.0], atol=1e-8)
    assert res.cost < 1e-16


def test_ordering_constraint_holds_exactly():
    # optimum wants x0 = 2 > x1 = 1; ordering x0 <= x1 forces them together
    prob = FitProblem(lambda x: np.array([x[0] - 2.0, x[1] - 1.0]), [0.0, 3.0], -10, 10,
                      linear_orderings=[(0, 1)], scaling=np.ones(2))
    res = solve_least_squares(prob)
    assert res.x_opt[0] <= res.x_opt[1]
    assert np.allclose(res.x_opt, [1.5, 1.5], atol=1e-4)


def test_trajectory_penalty_escalates():
    # residual pulls x to 1, penalty forbids x > 0.5
    prob = FitProblem(lambda x: np.array([x[0] - 1.0]), [0.0], -2, 2, scaling=np.ones(1),
                      trajectory_penalty_fn=lambda x: max(0.0, x[0] - 0.5) ** 2)
    res = solve_least_squares(prob, SolverOptions(max_escalations=8))
    assert res.escalations > 0
    assert res.x_opt[0] == pytest.approx(0.5, abs=1e-3)
    loose = solve_least_squares(prob, SolverOptions(max_escalations=0))
    assert loose.termination == PENALTY_ACTIVE


def test_finite_difference_jacobian_matches_analytic():
    def fun(x):
        return np.array([np.sin(x[0]) * x[1], x[0] ** 2 - np.exp(x[1]), x[0] * x[1] ** 3])

    def jac(x):
        return np.array([[np.cos(x[0]) * x[1], np.sin(x[0])],
                         [2 * x[0], -np.exp(x[1])],
                         [x[1] ** 3, 3 * x[0] * x[1] ** 2]])

    x = np.array([0.7, -0.4])
    for method, tol in (("forward", 1e-5), ("central", 1e-9)):
        step = 1e-6 if method == "forward" else 1e-5
        got = finite_diff_jacobian(fun, x, np.ones(2), rel_step=step, method=method)
        assert np.max(np.abs(got - jac(x))) < tol


def test_jacobian_probe_failure_names_parameter():
    def fun(x):
        return np.array([x[0], np.nan if x[1] > 1.0 else x[1]])

    with pytest.raises(ProbeError) as info:
        finite_diff_jacobian(fun, np.array([0.5, 1.0]), np.ones(2), upper=np.array([2.0, 2.0]))
    assert info.value.index == 1


def test_nonfinite_start_is_rejected():
    prob = FitProblem(lambda x: np.array([np.nan]), [0.0], -1, 1)
    with pytest.raises(InvalidStartError):
        solve_least_squares(prob)


def test_problem_validation():
    with pytest.raises(InvalidArgumentError):
        FitProblem(lambda x: x, [2.0], 0.0, 1.0)
    with pytest.raises(InvalidArgumentError):
        FitProblem(lambda x: x, [0.5], 1.0, 0.0)
    with pytest.raises(InvalidArgumentError):
        FitProblem(lambda x: x, [0.5, 0.5], 0.0, 1.0, linear_orderings=[(0, 0)])


def test_multi_start_deterministic_under_seed():
    def fun(x):
        return np.array([np.sin(3 * x[0]) + 0.1 * x[0], x[1] - 0.3])

    prob = FitProblem(fun, [0.0, 0.0], [-3, -1], [3, 1], scaling=np.ones(2))
    r1 = multi_start(prob, 5, seed=42)
    r2 = multi_start(prob, 5, seed=42)
    assert np.array_equal(r1.x_opt, r2.x_opt) and r1.cost == r2.cost
    s1 = latin_hypercube_starts([-3, -1], [3, 1], 5, 42)
    assert np.array_equal(s1, latin_hypercube_starts([-3, -1], [3, 1], 5, 42))
    assert not np.array_equal(s1, latin_hypercube_starts([-3, -1], [3, 1], 5, 43))


def test_multi_start_all_fail():
    prob = FitProblem(lambda x: np.array([np.nan]), [0.0], -1, 1)
    with pytest.raises(MultiStartError) as info:
        multi_start(prob, 3, seed=0)
    assert len(info.value.diagnostics["starts"]) == 3


def test_latin_hypercube_stratification():
    pts = latin_hypercube_starts([0, 10], [1, 20], 8, 1)
    for d, (lo, hi) in enumerate(((0, 1), (10, 20))):
        bins = np.floor((pts[:, d] - lo) / (hi - lo) * 8).astype(int)
        assert sorted(bins) == list(range(8))


def test_dataset_rmse_split():
    a, b = _linear(3, 20, 2)
    prob = FitProblem(lambda x: a @ x - b, np.zeros(2), -10, 10, scaling=np.ones(2),
                      dataset_slices=[slice(0, 5), slice(5, 20)])
    res = solve_least_squares(prob)
    r = a @ res.x_opt - b
    assert res.rmse_per_dataset[0] == pytest.approx(np.sqrt(np.mean(r[:5] ** 2)), rel=1e-10)
    assert res.rmse_per_dataset[1] == pytest.approx(np.sqrt(np.mean(r[5:] ** 2)), rel=1e-10)
