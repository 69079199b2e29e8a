"""Kinetics stage: simulation-error fit of the nine SPM transport/kinetic parameters.

Equilibrium curves and stoichiometry limits come frozen from the
equilibrium stage. Trial points that drive a surface stoichiometry out of
(0, 1) are simulated with clipping and pay a penalty instead of aborting.
"""

import logging
from collections import OrderedDict
from dataclasses import dataclass, field, replace

import numpy as np

from ..errors import InvalidArgumentError, OptimizerError
from ..optimize import FitProblem, SolverOptions, multi_start, solve_least_squares
from ..spm import FARADAY, simulate
from .metrics import rmse

log = logging.getLogger(__name__)

FIELDS = ("v_n", "v_p", "r_sn", "r_sp", "d_sn", "d_sp", "k_n", "k_p", "r_f")
UNIT_NAMES = ("v_n_m3", "v_p_m3", "r_sn_m", "r_sp_m", "d_sn_m2_per_s", "d_sp_m2_per_s",
              "k_n_m2p5_per_mol0p5_s", "k_p_m2p5_per_mol0p5_s", "r_f_ohm")
NAN_RESIDUAL_V = 1.0
BULK_TOLERANCE = 1e-3
# Clip band used while fitting; keeps the curves finite and moderate for
# trial points that run a surface stoichiometry to its limit.
CLIP_MARGIN = 1e-3


KINETICS_OPTIONS = SolverOptions(ftol=1e-9, max_iter=100)


def capacity_volumes(params):
    """Electrode volumes whose lithium swing between the limits equals q_nom."""
    q = 3600.0 * params.q_nom / FARADAY
    return (q / (params.c_smax_n * abs(params.theta_n_100 - params.theta_n_0)),
            q / (params.c_smax_p * abs(params.theta_p_0 - params.theta_p_100)))


def kinetic_vector(params):
    return np.array([getattr(params, f) for f in FIELDS], dtype=float)


def with_kinetics(params, x):
    return replace(params, **{f: float(v) for f, v in zip(FIELDS, x)})


class _Simulations:
    """Memoized clipped simulations of every dataset at a parameter vector."""

    def __init__(self, base, datasets, size=8):
        self.base = base
        self.datasets = datasets
        self.cache = OrderedDict()
        self.size = size
        self.n_calls = 0
        self.n_saturated = 0

    def __call__(self, x):
        key = np.asarray(x, dtype=float).tobytes()
        hit = self.cache.get(key)
        if hit is not None:
            self.cache.move_to_end(key)
            return hit
        self.n_calls += 1
        params = with_kinetics(self.base, x)
        sims = [simulate(params, ds.initial_soc, ds.profile, on_saturation="clip", keep_profiles=False,
                         clip_eps=CLIP_MARGIN)
                for ds in self.datasets]
        if any(s.saturated for s in sims):
            self.n_saturated += 1
            log.debug("evaluation %d saturated at x=%s", self.n_calls, np.array2string(x))
        self.cache[key] = sims
        if len(self.cache) > self.size:
            self.cache.popitem(last=False)
        return sims


def _bulk_excursion(sim, limits):
    lo_n, hi_n = limits.theta_n_0 - BULK_TOLERANCE, limits.theta_n_100 + BULK_TOLERANCE
    lo_p, hi_p = limits.theta_p_100 - BULK_TOLERANCE, limits.theta_p_0 + BULK_TOLERANCE
    return (np.maximum(0.0, lo_n - sim.bulk_stoich_n) + np.maximum(0.0, sim.bulk_stoich_n - hi_n)
            + np.maximum(0.0, lo_p - sim.bulk_stoich_p) + np.maximum(0.0, sim.bulk_stoich_p - hi_p))


@dataclass(frozen=True)
class KineticsFit:
    params: object
    result: object = field(repr=False)
    rmse_per_dataset: tuple = ()
    n_simulations: int = 0
    n_saturated: int = 0

    def to_dict(self):
        out = self.result.summary(UNIT_NAMES)
        out["rmse_per_dataset_v"] = list(self.rmse_per_dataset)
        out["n_simulations"] = self.n_simulations
        out["n_saturated_evaluations"] = self.n_saturated
        return out


def build_kinetics_problem(datasets, base_params, x0=None, lower=None, upper=None, bound_factor=5.0):
    """FitProblem over the kinetic vector; returns (problem, simulator cache)."""
    if len(datasets) < 1:
        raise InvalidArgumentError("need at least one dataset")
    x0 = kinetic_vector(base_params) if x0 is None else np.asarray(x0, dtype=float)
    if x0.shape != (len(FIELDS),):
        raise InvalidArgumentError(f"x0 must have {len(FIELDS)} entries")
    lower = x0 / bound_factor if lower is None else np.asarray(lower, dtype=float)
    upper = x0 * bound_factor if upper is None else np.asarray(upper, dtype=float)
    sims = _Simulations(base_params, list(datasets))
    measured = [np.asarray(ds.voltage) for ds in datasets]
    limits = base_params.limits

    def residual(x):
        parts = []
        for sim, v in zip(sims(x), measured):
            r = sim.voltage - v
            parts.append(np.where(np.isfinite(r), r, NAN_RESIDUAL_V))
        return np.concatenate(parts)

    def penalty(x):
        total = 0.0
        for sim in sims(x):
            total += float(np.sum(sim.violation**2)) + float(np.sum(_bulk_excursion(sim, limits) ** 2))
        return total

    bounds = np.cumsum([0] + [len(v) for v in measured])
    problem = FitProblem(
        residual_fn=residual,
        x0=x0,
        lower=lower,
        upper=upper,
        scaling=np.abs(x0),
        trajectory_penalty_fn=penalty,
        dataset_slices=[slice(a, b) for a, b in zip(bounds[:-1], bounds[1:])],
        names=UNIT_NAMES,
    )
    return problem, sims


def fit_kinetics(datasets, base_params, x0=None, lower=None, upper=None, n_starts=4, seed=0,
                 options=None, start_spread=0.3, bound_factor=5.0, capacity_start=True):
    """Fit (V_n, V_p, r_n, r_p, D_n, D_p, k_n, k_p, R_f) to the given datasets.

    ``base_params`` carries the frozen equilibrium part (curves, limits) and,
    unless ``x0`` is given, the initial kinetic guess. Starts, in order:
    ``x0``; ``x0`` with both volumes set from the capacity and the frozen
    limits (if ``capacity_start``); Latin-hypercube draws in
    ``x0 * [1 - start_spread, 1 + start_spread]`` up to ``n_starts`` in total.
    The lowest-cost result wins.
    """
    if n_starts < 1:
        raise InvalidArgumentError("n_starts must be >= 1")
    options = options or KINETICS_OPTIONS
    problem, sims = build_kinetics_problem(datasets, base_params, x0, lower, upper, bound_factor)
    x0 = problem.x0
    starts = [x0]
    if capacity_start and n_starts > 1:
        xc = x0.copy()
        xc[:2] = np.clip(capacity_volumes(base_params), problem.lower[:2], problem.upper[:2])
        starts.append(xc)
    candidates, failures = [], []
    for k, xs in enumerate(starts):
        try:
            candidates.append(solve_least_squares(problem.with_x0(xs), options))
        except OptimizerError as exc:
            failures.append(repr(exc))
            log.info("kinetics start %d failed: %s", k, exc)
    n_lhs = n_starts - len(starts)
    if n_lhs > 0:
        try:
            candidates.append(multi_start(problem, n_lhs, seed, options,
                                          x0 * (1 - start_spread), x0 * (1 + start_spread)))
        except OptimizerError as exc:
            failures.append(repr(exc))
            log.info("extra kinetics starts failed: %s", exc)
    if not candidates:
        raise OptimizerError("kinetics fit failed from every start", {"failures": failures})
    best = min(candidates, key=lambda r: r.cost)
    fitted = with_kinetics(base_params, best.x_opt)
    per = tuple(rmse(ds.voltage, ds.voltage + best.residual[sl])
                for ds, sl in zip(datasets, problem.dataset_slices))
    return KineticsFit(fitted, best, per, sims.n_calls, sims.n_saturated)
