"""Equivalent circuit identification: static part from a PDT, RC dynamics by simulation error."""

import logging
from dataclasses import dataclass, field

import numpy as np

from ..ecm import EcmParameters, OcvMap, SocFunction, ecm_simulate
from ..errors import InsufficientDataError, InvalidArgumentError
from ..optimize import FitProblem, SolverOptions, solve_least_squares
from .metrics import rmse
from .ocv import OCV_WINDOW_S, extract_ocv_points

log = logging.getLogger(__name__)

ECM = "ecm"
ECM_PLUS = "ecm+"
VARIANTS = (ECM, ECM_PLUS)
DYNAMIC_NAMES = ("r1", "c1", "r2", "c2")
DEFAULT_DYNAMICS = (0.015, 1.0e3, 0.015, 2.0e4)  # ohm, F, ohm, F
DYNAMICS_OPTIONS = SolverOptions(ftol=1e-9, max_iter=100)


@dataclass(frozen=True)
class EcmStatic:
    ocv_map: OcvMap
    r0: SocFunction
    edge_soc: np.ndarray = field(repr=False)
    edge_r0: np.ndarray = field(repr=False)
    q_nom: float = 1.0

    def to_dict(self):
        return {"ocv_map": self.ocv_map.to_dict(), "r0": self.r0.to_dict("ohm"),
                "edge_soc": self.edge_soc.tolist(), "edge_r0_ohm": self.edge_r0.tolist(),
                "q_nom_ah": self.q_nom}

    @classmethod
    def from_dict(cls, d):
        return cls(OcvMap.from_dict(d["ocv_map"]), SocFunction.from_dict(d["r0"], "ohm"),
                   np.asarray(d["edge_soc"]), np.asarray(d["edge_r0_ohm"]), float(d["q_nom_ah"]))


def edge_resistances(dataset, q_nom, edge_fraction=0.5):
    """|dV|/|dI| across every current edge, with the SoC of the loaded sample."""
    i = np.asarray(dataset.current)
    v = np.asarray(dataset.voltage)
    di = np.diff(i)
    if di.size == 0:
        return np.zeros(0), np.zeros(0)
    big = np.flatnonzero(np.abs(di) >= edge_fraction * np.max(np.abs(di)))
    big = big[np.abs(di[big]) > 0]
    k = big + 1  # first sample after the edge
    soc = dataset.soc(q_nom)
    loaded = np.where(np.abs(i[k]) >= np.abs(i[k - 1]), k, k - 1)
    return soc[loaded], np.abs(v[k] - v[k - 1]) / np.abs(di[big])


def fit_exponential(soc, values, rate_bounds=(-50.0, 50.0)):
    """Least-squares fit of base + amp * exp(rate * soc); returns (base, amp, rate).

    Separable: for a fixed rate the base and amplitude are linear, so only
    the rate is iterated on (variable projection), from the best point of a
    coarse grid.
    """
    soc = np.asarray(soc, dtype=float)
    values = np.asarray(values, dtype=float)

    def linear_part(rate):
        basis = np.column_stack((np.ones_like(soc), np.exp(rate * soc)))
        coef, *_ = np.linalg.lstsq(basis, values, rcond=None)
        return coef, basis @ coef - values

    grid = np.linspace(max(-20.0, rate_bounds[0]), min(20.0, rate_bounds[1]), 81)
    rate0 = min(grid, key=lambda r: float(np.sum(linear_part(r)[1] ** 2)))
    # normalized so the gradient tolerance does not depend on the units
    scale = max(float(np.mean(np.abs(values))), 1e-300)
    problem = FitProblem(
        residual_fn=lambda x: linear_part(x[0])[1] / scale,
        x0=np.array([rate0]),
        lower=np.array([rate_bounds[0]]),
        upper=np.array([rate_bounds[1]]),
        scaling=np.ones(1),
    )
    rate = float(solve_least_squares(problem).x_opt[0])
    (base, amp), _ = linear_part(rate)
    return float(base), float(amp), rate


def ecm_static_characterize(pdt, q_nom, edge_fraction=0.5):
    """OCV map and R0(soc) from a pulse discharge test.

    The OCV map interpolates the rest-end points; when the record opens with a
    rest, the mean of its first ``OCV_WINDOW_S`` seconds adds a point at the
    initial SoC (the cell starts relaxed).
    """
    edge_soc, edge_r0 = edge_resistances(pdt, q_nom, edge_fraction)
    if edge_soc.size < 4:
        raise InsufficientDataError(f"R0 fit needs at least 4 current edges, found {edge_soc.size}")
    points = extract_ocv_points(pdt, q_nom)
    soc, ocv = list(points.soc), list(points.ocv)
    i = np.asarray(pdt.current)
    lead = int(np.argmax(i != 0)) if np.any(i != 0) else i.size
    if lead > 0 and np.min(np.abs(np.asarray(soc) - pdt.initial_soc)) > 1e-9:
        n = min(lead, max(1, int(round(OCV_WINDOW_S / pdt.dt))))
        soc.append(pdt.initial_soc)
        ocv.append(float(np.mean(pdt.voltage[:n])))
    base, amp, rate = fit_exponential(edge_soc, edge_r0)
    r0 = SocFunction.exponential(base, amp, rate) if amp != 0 else SocFunction.constant(base)
    return EcmStatic(OcvMap(np.array(soc), np.array(ocv)), r0, edge_soc, edge_r0, q_nom)


@dataclass(frozen=True)
class EcmFit:
    params: EcmParameters
    result: object = field(repr=False)
    rmse_per_dataset: tuple = ()

    def to_dict(self):
        out = self.result.summary()
        out["rmse_per_dataset_v"] = list(self.rmse_per_dataset)
        return out


def _assemble(static, q_nom, variant, x):
    if variant == ECM:
        funcs = [SocFunction.constant(v) for v in x]
    else:
        funcs = [SocFunction.exponential(*x[3 * k:3 * k + 3]) for k in range(4)]
    r1, c1, r2, c2 = funcs
    return EcmParameters(static.ocv_map, static.r0, r1, c1, r2, c2, q_nom, variant)


def fit_ecm_dynamics(datasets, static, q_nom, variant=ECM, x0=None, base=None, options=None):
    """Fit R1, C1, R2, C2 by simulation error over ``datasets``.

    For ``ecm`` the four are constants started from ``x0`` (default
    ``DEFAULT_DYNAMICS``). For ``ecm+`` each becomes base + amp exp(rate soc)
    with amp >= 0, started from the constant fit ``base`` (an
    :class:`EcmParameters`) so the first iterate reproduces it exactly.
    """
    if variant not in VARIANTS:
        raise InvalidArgumentError(f"variant must be one of {VARIANTS}")
    options = options or DYNAMICS_OPTIONS
    measured = [np.asarray(ds.voltage) for ds in datasets]

    if variant == ECM:
        x0 = np.array(DEFAULT_DYNAMICS if x0 is None else x0, dtype=float)
        lower = np.array([1e-6, 1.0, 1e-6, 1.0])
        upper = np.array([1.0, 1e7, 1.0, 1e7])
        scaling = np.abs(x0)
    else:
        if base is None:
            base_x = np.array(DEFAULT_DYNAMICS if x0 is None else x0, dtype=float)
        else:
            base_x = np.array([base.r1.base, base.c1.base, base.r2.base, base.c2.base])
        x0 = np.concatenate([[0.9 * v, 0.1 * v, 0.0] for v in base_x])
        lower = np.concatenate([[v / 100.0, 0.0, -20.0] for v in base_x])
        upper = np.concatenate([[v * 10.0, v * 10.0, 20.0] for v in base_x])
        scaling = np.concatenate([[v, v, 1.0] for v in base_x])

    def residual(x):
        params = _assemble(static, q_nom, variant, x)
        return np.concatenate([ecm_simulate(params, ds.initial_soc, ds.profile).voltage - v
                               for ds, v in zip(datasets, measured)])

    edges = np.cumsum([0] + [v.size for v in measured])
    problem = FitProblem(
        residual_fn=residual, x0=x0, lower=lower, upper=upper, scaling=scaling,
        dataset_slices=[slice(a, b) for a, b in zip(edges[:-1], edges[1:])],
    )
    res = solve_least_squares(problem, options)
    params = _assemble(static, q_nom, variant, res.x_opt)
    per = tuple(rmse(v, v + res.residual[sl]) for v, sl in zip(measured, problem.dataset_slices))
    return EcmFit(params, res, per)
