"""Bounded Levenberg-Marquardt least squares with penalty constraints.

All solver arithmetic happens in scaled coordinates u = x / scaling. Bounds
are enforced by projection; variables sitting on a bound with the gradient
pushing outward are frozen for the step. Ordering constraints x[i] <= x[j]
and an optional scalar trajectory penalty enter as extra residuals whose
weights are raised tenfold (at most ``max_escalations`` times) when they are
still violated at convergence. A final projection makes orderings exact.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.stats import qmc

from .errors import (
    CellIdError,
    InvalidArgumentError,
    InvalidStartError,
    MultiStartError,
    OptimizerError,
    ProbeError,
    StallError,
)

log = logging.getLogger(__name__)

GRADIENT_TOL = "gradient_tol"
STEP_TOL = "step_tol"
MAX_ITER = "max_iter"
PENALTY_ACTIVE = "penalty_active"

ORDERING_TOL = 1e-9


@dataclass
class SolverOptions:
    gtol: float = 1e-8
    xtol: float = 1e-10
    ftol: float = 1e-15
    max_iter: int = 400
    fd_step: float = 1e-6
    lambda0: float = 1e-3
    lambda_max: float = 1e16
    ordering_weight: float = 1e4
    penalty_weight: float = 1.0
    penalty_tol: float = 1e-10
    escalation_factor: float = 10.0
    max_escalations: int = 5


@dataclass
class FitProblem:
    residual_fn: Callable[[np.ndarray], np.ndarray]
    x0: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    scaling: np.ndarray | None = None
    linear_orderings: Sequence[tuple[int, int]] = ()
    trajectory_penalty_fn: Callable[[np.ndarray], float] | None = None
    dataset_slices: Sequence[slice] | None = None
    names: Sequence[str] | None = None

    def __post_init__(self):
        self.x0 = np.asarray(self.x0, dtype=float).copy()
        n = self.x0.size
        self.lower = np.broadcast_to(np.asarray(self.lower, dtype=float), (n,)).copy()
        self.upper = np.broadcast_to(np.asarray(self.upper, dtype=float), (n,)).copy()
        if self.scaling is None:
            s = np.abs(self.x0)
            s[s == 0] = 1.0
            self.scaling = s
        self.scaling = np.broadcast_to(np.asarray(self.scaling, dtype=float), (n,)).copy()
        if np.any(self.lower > self.upper):
            raise InvalidArgumentError("lower bound exceeds upper bound")
        if np.any(self.x0 < self.lower) or np.any(self.x0 > self.upper):
            raise InvalidArgumentError("x0 violates the bounds")
        if np.any(~(self.scaling > 0)):
            raise InvalidArgumentError("scaling must be strictly positive")
        for i, j in self.linear_orderings:
            if not (0 <= i < n and 0 <= j < n) or i == j:
                raise InvalidArgumentError(f"bad ordering pair ({i}, {j})")

    def with_x0(self, x0):
        return FitProblem(
            residual_fn=self.residual_fn, x0=x0, lower=self.lower, upper=self.upper,
            scaling=self.scaling, linear_orderings=self.linear_orderings,
            trajectory_penalty_fn=self.trajectory_penalty_fn,
            dataset_slices=self.dataset_slices, names=self.names,
        )


@dataclass(frozen=True)
class FitResult:
    x_opt: np.ndarray
    cost: float
    rmse_per_dataset: tuple
    iterations: int
    termination: str
    jacobian_condition_estimate: float
    residual: np.ndarray = field(repr=False)
    penalty: float = 0.0
    n_evaluations: int = 0
    escalations: int = 0
    cost_history: tuple = field(default=(), repr=False)
    x_start: np.ndarray | None = field(default=None, repr=False)

    def summary(self, names=None):
        out = {
            "cost": self.cost,
            "rmse_per_dataset": list(self.rmse_per_dataset),
            "iterations": self.iterations,
            "termination": self.termination,
            "jacobian_condition_estimate": self.jacobian_condition_estimate,
            "penalty": self.penalty,
            "n_evaluations": self.n_evaluations,
            "escalations": self.escalations,
        }
        if names is not None:
            out["x_opt"] = {k: float(v) for k, v in zip(names, self.x_opt)}
        else:
            out["x_opt"] = [float(v) for v in self.x_opt]
        return out


def finite_diff_jacobian(residual_fn, x, scaling, lower=None, upper=None, f0=None,
                         rel_step=1e-6, method="forward"):
    """Finite-difference Jacobian d r / d x in unscaled coordinates.

    Step for parameter i is ``rel_step * scaling[i]``. Forward differences by
    default; a backward step is used where the forward probe would leave the
    box, and ``method="central"`` uses two-sided probes wherever both fit.
    """
    x = np.asarray(x, dtype=float)
    scaling = np.asarray(scaling, dtype=float)
    lower = np.full(x.size, -np.inf) if lower is None else np.asarray(lower, dtype=float)
    upper = np.full(x.size, np.inf) if upper is None else np.asarray(upper, dtype=float)
    if f0 is None:
        f0 = np.asarray(residual_fn(x), dtype=float)
    jac = np.empty((f0.size, x.size))

    def probe(xp, i):
        fp = np.asarray(residual_fn(xp), dtype=float)
        if fp.shape != f0.shape or not np.all(np.isfinite(fp)):
            raise ProbeError(f"non-finite residual when probing parameter {i}", index=i)
        return fp

    for i in range(x.size):
        h = rel_step * scaling[i]
        up_ok = x[i] + h <= upper[i]
        down_ok = x[i] - h >= lower[i]
        xp = x.copy()
        if method == "central" and up_ok and down_ok:
            xp[i] = x[i] + h
            fp = probe(xp, i)
            xp[i] = x[i] - h
            fm = probe(xp, i)
            jac[:, i] = (fp - fm) / (2 * h)
        elif up_ok or not down_ok:
            xp[i] = x[i] + h
            jac[:, i] = (probe(xp, i) - f0) / h
        else:
            xp[i] = x[i] - h
            jac[:, i] = (f0 - probe(xp, i)) / h
    return jac


class _Augmented:
    """Residual in scaled coordinates with penalty rows appended."""

    def __init__(self, problem, w_order, w_traj):
        self.p = problem
        self.w_order = w_order
        self.w_traj = w_traj
        self.n_evals = 0

    def parts(self, u):
        x = u * self.p.scaling
        self.n_evals += 1
        r = np.asarray(self.p.residual_fn(x), dtype=float).ravel()
        s = self.p.scaling
        order = np.array([max(0.0, x[i] - x[j]) / np.sqrt(s[i] * s[j])
                          for i, j in self.p.linear_orderings])
        pen = 0.0
        if self.p.trajectory_penalty_fn is not None:
            pen = float(self.p.trajectory_penalty_fn(x))
        return r, order, pen

    def __call__(self, u):
        r, order, pen = self.parts(u)
        extra = [r]
        if order.size:
            extra.append(np.sqrt(self.w_order) * order)
        if self.p.trajectory_penalty_fn is not None:
            extra.append(np.array([np.sqrt(self.w_traj * max(pen, 0.0))]))
        return np.concatenate(extra)


def _project_orderings(x, problem):
    if not problem.linear_orderings:
        return x
    x = x.copy()
    for _ in range(100):
        worst = 0.0
        for i, j in problem.linear_orderings:
            if x[i] > x[j]:
                worst = max(worst, x[i] - x[j])
                mid = 0.5 * (x[i] + x[j])
                x[i] = x[j] = mid
        x = np.clip(x, problem.lower, problem.upper)
        if worst <= 0.0:
            break
    return x


def _ordering_violation(x, problem):
    return max((x[i] - x[j] for i, j in problem.linear_orderings), default=0.0)


def _lm(fun, u0, lo, hi, opts, max_iter):
    """Projected LM on ``fun`` (scaled). Returns (u, r, iters, termination, J, history)."""
    u = np.clip(u0, lo, hi)
    r = fun(u)
    if not np.all(np.isfinite(r)):
        raise InvalidStartError("residual is not finite at the starting point",
                                {"x_scaled": u.tolist()})
    cost = float(r @ r)
    jac = finite_diff_jacobian(fun, u, np.ones_like(u), lo, hi, f0=r, rel_step=opts.fd_step)
    jtj = jac.T @ jac
    lam = opts.lambda0 * max(float(np.max(np.diag(jtj))), 1e-300)
    nu = 2.0
    history = [cost]
    accepted = 0
    it = 0
    while it < max_iter:
        it += 1
        g = jac.T @ r
        pg = u - np.clip(u - g, lo, hi)
        if np.max(np.abs(pg)) <= opts.gtol:
            return u, r, it, GRADIENT_TOL, jac, history
        free = ~(((u <= lo) & (g > 0)) | ((u >= hi) & (g < 0)))
        if not np.any(free):
            return u, r, it, GRADIENT_TOL, jac, history
        h = jtj[np.ix_(free, free)]
        diag = np.diag(h).copy()
        floor = 1e-12 * max(float(diag.max()), 1e-300)
        diag = np.maximum(diag, floor)
        while True:
            try:
                delta_f = np.linalg.solve(h + lam * np.diag(diag), -g[free])
            except np.linalg.LinAlgError:
                delta_f = None
            if delta_f is not None and np.all(np.isfinite(delta_f)):
                delta = np.zeros_like(u)
                delta[free] = delta_f
                u_new = np.clip(u + delta, lo, hi)
                step = u_new - u
                if np.linalg.norm(step) <= opts.xtol * (np.linalg.norm(u) + opts.xtol):
                    return u, r, it, STEP_TOL, jac, history
                r_new = fun(u_new)
                cost_new = float(r_new @ r_new) if np.all(np.isfinite(r_new)) else np.inf
                model = r + jac @ step
                pred = cost - float(model @ model)
                if cost_new < cost and pred > 0:
                    rho = (cost - cost_new) / pred
                    lam *= max(1.0 / 3.0, 1.0 - (2.0 * rho - 1.0) ** 3)
                    nu = 2.0
                    rel_drop = (cost - cost_new) / max(cost, 1e-300)
                    u, r, cost = u_new, r_new, cost_new
                    history.append(cost)
                    accepted += 1
                    jac = finite_diff_jacobian(fun, u, np.ones_like(u), lo, hi, f0=r,
                                               rel_step=opts.fd_step)
                    jtj = jac.T @ jac
                    if rel_drop <= opts.ftol:
                        return u, r, it, STEP_TOL, jac, history
                    break
            lam *= nu
            nu *= 2.0
            if lam > opts.lambda_max or not np.isfinite(lam):
                if accepted or np.max(np.abs(pg)) <= 1e3 * opts.gtol:
                    return u, r, it, STEP_TOL, jac, history
                raise StallError(
                    "all trial steps rejected (damping overflow)",
                    {"iterations": it, "cost": cost, "x_scaled": u.tolist(),
                     "projected_gradient": float(np.max(np.abs(pg)))},
                )
    return u, r, it, MAX_ITER, jac, history


def solve_least_squares(problem, options=None):
    """Minimize the sum of squared residuals of ``problem`` within its bounds."""
    opts = options or SolverOptions()
    s = problem.scaling
    lo, hi = problem.lower / s, problem.upper / s
    w_order, w_traj = opts.ordering_weight, opts.penalty_weight
    u = problem.x0 / s
    total_iter = 0
    n_evals = 0
    escalations = 0
    history = []
    termination = MAX_ITER
    jac = None
    while True:
        fun = _Augmented(problem, w_order, w_traj)
        u, _, iters, termination, jac, hist = _lm(fun, u, lo, hi, opts,
                                                  max(1, opts.max_iter - total_iter))
        total_iter += iters
        n_evals += fun.n_evals
        history.extend(hist)
        x = u * s
        _, _, pen = fun.parts(u)
        violated = (_ordering_violation(x, problem) > ORDERING_TOL
                    or (problem.trajectory_penalty_fn is not None and pen > opts.penalty_tol))
        if not violated or escalations >= opts.max_escalations or total_iter >= opts.max_iter:
            if violated:
                termination = PENALTY_ACTIVE
            break
        escalations += 1
        w_order *= opts.escalation_factor
        w_traj *= opts.escalation_factor
        log.debug("constraint violated at convergence, escalation %d", escalations)

    x = np.clip(_project_orderings(u * s, problem), problem.lower, problem.upper)
    final = _Augmented(problem, w_order, w_traj)
    r, _, pen = final.parts(x / s)
    n_evals += final.n_evals
    if not np.all(np.isfinite(r)):
        raise StallError("residual not finite at the returned point", {"x": x.tolist()})
    slices = problem.dataset_slices or [slice(0, r.size)]
    rmse = tuple(float(np.sqrt(np.mean(r[sl] ** 2))) for sl in slices)
    n_data = r.size
    jd = jac[:n_data]
    try:
        cond = float(np.linalg.cond(jd))
    except np.linalg.LinAlgError:
        cond = float("inf")
    return FitResult(
        x_opt=x,
        cost=float(r @ r),
        rmse_per_dataset=rmse,
        iterations=total_iter,
        termination=termination,
        jacobian_condition_estimate=cond,
        residual=r,
        penalty=pen,
        n_evaluations=n_evals,
        escalations=escalations,
        cost_history=tuple(history),
        x_start=problem.x0.copy(),
    )


def latin_hypercube_starts(lower, upper, n_starts, seed):
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    sampler = qmc.LatinHypercube(d=lower.size, seed=np.random.default_rng(seed))
    return qmc.scale(sampler.random(n_starts), lower, upper) if np.all(upper > lower) else (
        lower + sampler.random(n_starts) * (upper - lower)
    )


def multi_start(problem, n_starts, seed, options=None, start_lower=None, start_upper=None):
    """Best-of-``n_starts`` solve from Latin-hypercube starting points.

    Starts are drawn inside ``[start_lower, start_upper]`` (default: the
    problem bounds, intersected with them in any case).
    """
    if n_starts < 1:
        raise InvalidArgumentError("n_starts must be >= 1")
    lo = problem.lower if start_lower is None else np.maximum(start_lower, problem.lower)
    hi = problem.upper if start_upper is None else np.minimum(start_upper, problem.upper)
    starts = latin_hypercube_starts(lo, hi, n_starts, seed)
    best = None
    failures = []
    for k, x0 in enumerate(starts):
        x0 = _project_orderings(np.clip(x0, problem.lower, problem.upper), problem)
        try:
            res = solve_least_squares(problem.with_x0(x0), options)
        except (OptimizerError, CellIdError, FloatingPointError) as exc:
            failures.append({"start": k, "x0": x0.tolist(), "error": repr(exc)})
            log.info("start %d failed: %s", k, exc)
            continue
        log.info("start %d: cost %.6g after %d iterations", k, res.cost, res.iterations)
        if best is None or res.cost < best.cost:
            best = res
    if best is None:
        raise MultiStartError(f"all {n_starts} starts failed", {"starts": failures})
    return best
