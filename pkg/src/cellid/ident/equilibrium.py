"""Equilibrium stage: stoichiometry limits, curve translations and local corrections.

The OCV prediction at SoC s is U_p(theta_p(s)) - U_n(theta_n(s)) with both
stoichiometries linear in s between their 0% and 100% limits. The limit
vector is ordered (theta_n_0, theta_p_0, theta_n_100, theta_p_100).
"""

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from ..curves import (
    CORRECTION_LIMIT_V,
    EXPONENTIALS,
    GAUSSIANS,
    N_GAUSSIANS,
    CorrectionTerm,
)
from ..errors import CurveDomainError, InsufficientDataError, InvalidArgumentError, OptimizerError
from ..optimize import FitProblem, SolverOptions, multi_start, solve_least_squares
from ..spm import StoichLimits
from .metrics import rmse
from .ocv import extract_ocv_points

log = logging.getLogger(__name__)

LIMIT_NAMES = ("theta_n_0", "theta_p_0", "theta_n_100", "theta_p_100")
TRANSLATION_NAMES = ("a_n", "b_n_v", "a_p", "b_p_v")
SHIFT_BOUND = 0.1
OFFSET_BOUND_V = 0.05
MIN_POINTS = 8
# Cost of a translation at its bound, in volts of residual. The prediction
# only depends on b_p - b_n and each shift a_i trades off exactly against a
# common move of that electrode's limits; this small ridge picks the smallest
# translations among equivalent optima.
TRANSLATION_RIDGE_V = 1e-3
DOMAIN_PENALTY_V = 1.0

DEFAULT_LIMITS_GUESS = (0.05, 0.95, 0.85, 0.05)
# Box for extra Latin-hypercube starts of the limit fit.
START_LOW = (0.0, 0.8, 0.6, 0.0, -0.02, -0.01, -0.02, -0.01)
START_HIGH = (0.2, 1.0, 1.0, 0.2, 0.02, 0.01, 0.02, 0.01)


def predict_ocv(anode, cathode, limits, soc):
    limits = np.asarray(limits, dtype=float)
    soc = np.asarray(soc, dtype=float)
    theta_n = limits[0] + soc * (limits[2] - limits[0])
    theta_p = limits[1] + soc * (limits[3] - limits[1])
    return cathode(theta_p) - anode(theta_n)


def _as_limits(vec):
    return StoichLimits(theta_n_0=float(vec[0]), theta_n_100=float(vec[2]),
                        theta_p_0=float(vec[1]), theta_p_100=float(vec[3]))


def _best(problem, n_starts, seed, options, box):
    """Solve from ``problem.x0`` and from ``n_starts - 1`` extra LHS starts."""
    best = solve_least_squares(problem, options)
    if n_starts > 1:
        lo, hi = box
        try:
            other = multi_start(problem, n_starts - 1, seed, options, lo, hi)
        except OptimizerError as exc:
            log.info("extra starts failed: %s", exc)
        else:
            if other.cost < best.cost:
                best = other
    return best


@dataclass(frozen=True)
class LimitFit:
    limits: StoichLimits
    translations: tuple
    rmse: float
    anode: object
    cathode: object
    result: object = field(repr=False)
    minimal_data: bool = False


def fit_stoichiometry_limits(points, anode, cathode, x0=None, options=None, n_starts=8, seed=0,
                             ridge=TRANSLATION_RIDGE_V):
    """Fit limits and translations (a_n, b_n, a_p, b_p) to OCV points.

    ``anode``/``cathode`` are the literature curves (any translation they
    already carry is replaced). Returns a :class:`LimitFit` whose curves carry
    the fitted translations.
    """
    m = len(points)
    if m < MIN_POINTS:
        raise InsufficientDataError(f"limit fit needs at least {MIN_POINTS} OCV points, got {m}")
    soc, ocv = points.soc, points.ocv
    reg_scale = ridge / np.array([SHIFT_BOUND, OFFSET_BOUND_V, SHIFT_BOUND, OFFSET_BOUND_V])

    def curves(x):
        return (anode.with_changes(shift_a=x[4], shift_b=x[5]),
                cathode.with_changes(shift_a=x[6], shift_b=x[7]))

    def residual(x):
        an, ca = curves(x)
        try:
            r = predict_ocv(an, ca, x[:4], soc) - ocv
        except CurveDomainError:
            r = np.full(m, DOMAIN_PENALTY_V)
        return np.concatenate((r, reg_scale * x[4:]))

    if x0 is None:
        x0 = np.array(DEFAULT_LIMITS_GUESS + (0.0, 0.0, 0.0, 0.0))
    bound = np.array([1, 1, 1, 1, SHIFT_BOUND, OFFSET_BOUND_V, SHIFT_BOUND, OFFSET_BOUND_V], float)
    problem = FitProblem(
        residual_fn=residual,
        x0=x0,
        lower=np.concatenate((np.zeros(4), -bound[4:])),
        upper=bound,
        scaling=np.array([0.1, 0.1, 0.1, 0.1, 0.01, 0.01, 0.01, 0.01]),
        linear_orderings=[(0, 2), (3, 1)],
        dataset_slices=[slice(0, m)],
        names=LIMIT_NAMES + TRANSLATION_NAMES,
    )
    try:
        res = _best(problem, n_starts, seed, options, (np.array(START_LOW), np.array(START_HIGH)))
    except OptimizerError as exc:
        exc.args = (f"[equilibrium stage 1] {exc.args[0]}",)
        raise
    x = res.x_opt
    an, ca = curves(x)
    fit_rmse = rmse(ocv, predict_ocv(an, ca, x[:4], soc))
    return LimitFit(limits=_as_limits(x[:4]), translations=tuple(float(v) for v in x[4:]),
                    rmse=fit_rmse, anode=an, cathode=ca, result=res, minimal_data=(m == MIN_POINTS))


@dataclass(frozen=True)
class CorrectionFit:
    anode: CorrectionTerm | None
    cathode: CorrectionTerm | None
    zone_rmse_before: tuple  # (low zone, high zone), V
    zone_rmse_after: tuple
    messages: tuple = ()


def _zone_rmse(values):
    return float(np.sqrt(np.mean(values**2))) if values.size else 0.0


def _gauss(params, s):
    g = np.asarray(params).reshape(-1, 3)
    return np.sum(g[:, 0] * np.exp(-(((g[:, 1] - s[:, None]) / g[:, 2]) ** 2)), axis=1)


def _fit_gaussians(s, target, max_terms, min_gain, options):
    """Greedy sum of gaussians: add one term at a time at the largest remaining error."""
    params = np.zeros((0, 3))
    best = _zone_rmse(target)
    width0 = max(0.05, 0.5 * (s.max() - s.min()) / max(s.size, 1))
    for _ in range(max_terms):
        remaining = target - _gauss(params, s)
        k = int(np.argmax(np.abs(remaining)))
        trial0 = np.vstack([params, [remaining[k], s[k], width0]]).ravel()
        n = trial0.size // 3
        lower = np.tile([-CORRECTION_LIMIT_V, -0.2, 0.01], n)
        upper = np.tile([CORRECTION_LIMIT_V, 1.2, 0.5], n)
        problem = FitProblem(
            residual_fn=lambda p: _gauss(p, s) - target,
            x0=np.clip(trial0, lower, upper),
            lower=lower,
            upper=upper,
            scaling=np.tile([0.01, 0.1, 0.1], n),
        )
        try:
            res = solve_least_squares(problem, options)
        except OptimizerError:
            break
        new = _zone_rmse(res.residual)
        if new >= (1.0 - min_gain) * best:
            break
        params, best = res.x_opt.reshape(-1, 3), new
    return params, best


def _exp_terms(p, s):
    # p = (value at soc=1, rate) pairs; E(s) = v exp(rate (s - 1))
    p = np.asarray(p).reshape(-1, 2)
    return np.sum(p[:, 0] * np.exp(p[:, 1] * (s[:, None] - 1.0)), axis=1)


def _fit_exponentials(s, target, min_gain, options):
    params = np.zeros((0, 2))
    best = _zone_rmse(target)
    for _ in range(2):
        remaining = target - _exp_terms(params, s)
        k = int(np.argmax(s))
        rate0 = 10.0
        v0 = remaining[k] * np.exp(rate0 * (1.0 - s[k]))
        trial0 = np.vstack([params, [v0, rate0]]).ravel()
        n = trial0.size // 2
        lower = np.tile([-CORRECTION_LIMIT_V, 0.0], n)
        upper = np.tile([CORRECTION_LIMIT_V, 40.0], n)
        problem = FitProblem(
            residual_fn=lambda p: _exp_terms(p, s) - target,
            x0=np.clip(trial0, lower, upper),
            lower=lower,
            upper=upper,
            scaling=np.tile([0.01, 10.0], n),
        )
        try:
            res = solve_least_squares(problem, options)
        except OptimizerError:
            break
        new = _zone_rmse(res.residual)
        if new >= (1.0 - min_gain) * best:
            break
        params, best = res.x_opt.reshape(-1, 2), new
    return params, best


def fit_corrections(soc, residual, limits, low_zone=0.4, high_zone=0.8, max_gaussians=N_GAUSSIANS,
                    min_gain=0.3, floor_v=1e-4, options=None):
    """Local corrections for the residual ``measured - predicted`` OCV.

    Low-SoC residuals are attributed to the anode (sum of gaussians), high-SoC
    residuals to the cathode (sum of exponentials). A term is kept only if it
    lowers its zone RMSE by at least ``min_gain`` (relative), and the number
    of gaussians never exceeds a third of the zone's points. The default gain
    threshold sits above the ~18% an extra gaussian gains on pure noise with
    nine points. Zones already below ``floor_v`` are left alone. ``limits``
    are the stoichiometry limits the corrections are anchored to.
    """
    soc = np.asarray(soc, dtype=float)
    residual = np.asarray(residual, dtype=float)
    if soc.shape != residual.shape:
        raise InvalidArgumentError("soc and residual lengths differ")
    eps = 1e-6
    low = soc <= low_zone + eps
    high = soc >= high_zone - eps
    before = (_zone_rmse(residual[low]), _zone_rmse(residual[high]))
    msgs = []
    anode_corr = cathode_corr = None
    after_low, after_high = before

    n_terms = min(max_gaussians, int(low.sum()) // 3)
    if n_terms >= 1 and before[0] > floor_v:
        # U_n enters the OCV with a minus sign: E_n must cancel -residual
        g, after = _fit_gaussians(soc[low], -residual[low], n_terms, min_gain, options)
        if g.shape[0]:
            try:
                anode_corr = CorrectionTerm(GAUSSIANS, limits.theta_n_0, limits.theta_n_100,
                                            gauss_params=g)
                after_low = after
            except InvalidArgumentError as exc:
                msgs.append(f"anode correction rejected: {exc}")
    if high.sum() >= 2 and before[1] > floor_v:
        e, after = _fit_exponentials(soc[high], residual[high], min_gain, options)
        if e.shape[0]:
            beta = np.zeros(4)
            for i, (v1, rate) in enumerate(e):
                beta[2 * i] = v1 * np.exp(-rate)
                beta[2 * i + 1] = rate
            try:
                cathode_corr = CorrectionTerm(EXPONENTIALS, limits.theta_p_0, limits.theta_p_100,
                                              exp_params=beta)
                after_high = after
            except InvalidArgumentError as exc:
                msgs.append(f"cathode correction rejected: {exc}")
    if anode_corr is None and cathode_corr is None:
        msgs.append("no local correction improved its zone; curves left unchanged")
        warnings.warn(msgs[-1], RuntimeWarning, stacklevel=2)
    return CorrectionFit(anode_corr, cathode_corr, before, (after_low, after_high), tuple(msgs))


def reoptimize_limits(points, anode, cathode, limits0, options=None):
    """Refit the four limits on refined curves, translations frozen.

    Returns ``(limits, rmse, FitResult | None)``. When neither curve carries a
    correction the starting limits are already optimal and returned as is.
    """
    x0 = np.asarray(limits0.as_array(), dtype=float)
    soc, ocv = points.soc, points.ocv
    if anode.correction is None and cathode.correction is None:
        return limits0, rmse(ocv, predict_ocv(anode, cathode, x0, soc)), None
    m = len(points)

    def residual(x):
        try:
            return predict_ocv(anode, cathode, x, soc) - ocv
        except CurveDomainError:
            return np.full(m, DOMAIN_PENALTY_V)

    problem = FitProblem(residual_fn=residual, x0=x0, lower=np.zeros(4), upper=np.ones(4),
                         scaling=np.full(4, 0.1), linear_orderings=[(0, 2), (3, 1)],
                         names=LIMIT_NAMES)
    try:
        res = solve_least_squares(problem, options)
    except OptimizerError as exc:
        exc.args = (f"[equilibrium re-optimization] {exc.args[0]}",)
        raise
    return _as_limits(res.x_opt), rmse(ocv, predict_ocv(anode, cathode, res.x_opt, soc)), res


@dataclass(frozen=True)
class EquilibriumFitReport:
    limits_initial: StoichLimits
    limits_final: StoichLimits
    translations: tuple
    anode: object
    cathode: object
    rmse_stage1: float
    rmse_stage2: float
    points: object = field(repr=False)
    corrections: CorrectionFit | None = None
    refinement_accepted: bool = False
    minimal_data: bool = False
    diagnostics: tuple = ()

    @property
    def correction_params(self):
        a = None if self.anode.correction is None else self.anode.correction.gauss_params
        c = None if self.cathode.correction is None else self.cathode.correction.exp_params
        return a, c

    def to_dict(self):
        lim = lambda l: dict(zip(LIMIT_NAMES, (float(v) for v in l.as_array())))
        return {
            "limits_initial": lim(self.limits_initial),
            "limits_final": lim(self.limits_final),
            "translations": dict(zip(TRANSLATION_NAMES, self.translations)),
            "rmse_stage1_v": self.rmse_stage1,
            "rmse_stage2_v": self.rmse_stage2,
            "refinement_accepted": self.refinement_accepted,
            "minimal_data": self.minimal_data,
            "n_points": len(self.points),
            "anode_curve": self.anode.to_dict(),
            "cathode_curve": self.cathode.to_dict(),
            "diagnostics": list(self.diagnostics),
        }


def identify_equilibrium(pdt, q_nom, anode, cathode, low_zone=0.4, high_zone=0.8, options=None,
                         n_starts=8, seed=0):
    """Full equilibrium stage on a pulse-discharge dataset.

    Limits and translations first, then local corrections on the residual,
    then the limits again on the refined curves. The refinement is dropped if
    it does not lower the OCV RMSE.
    """
    points = extract_ocv_points(pdt, q_nom)
    stage1 = fit_stoichiometry_limits(points, anode, cathode, options=options, n_starts=n_starts,
                                      seed=seed)
    pred = predict_ocv(stage1.anode, stage1.cathode, stage1.limits.as_array(), points.soc)
    corr = fit_corrections(points.soc, points.ocv - pred, stage1.limits, low_zone, high_zone,
                           options=options)
    an = stage1.anode.with_changes(correction=corr.anode)
    ca = stage1.cathode.with_changes(correction=corr.cathode)
    limits, rmse2, _ = reoptimize_limits(points, an, ca, stage1.limits, options)
    diagnostics = list(corr.messages)
    accepted = corr.anode is not None or corr.cathode is not None
    if rmse2 > stage1.rmse:
        diagnostics.append("refinement raised the OCV RMSE and was discarded")
        an, ca, limits, rmse2, accepted = stage1.anode, stage1.cathode, stage1.limits, stage1.rmse, False
    an = an.checked(limits.theta_n_0, limits.theta_n_100)
    ca = ca.checked(limits.theta_p_0, limits.theta_p_100)
    diagnostics.extend(an.diagnostics + ca.diagnostics)
    if stage1.minimal_data:
        diagnostics.append(f"minimal data: {len(points)} OCV points for 8 unknowns")
    return EquilibriumFitReport(
        limits_initial=stage1.limits,
        limits_final=limits,
        translations=stage1.translations,
        anode=an,
        cathode=ca,
        rmse_stage1=stage1.rmse,
        rmse_stage2=rmse2,
        points=points,
        corrections=corr,
        refinement_accepted=accepted,
        minimal_data=stage1.minimal_data,
        diagnostics=tuple(diagnostics),
    )
