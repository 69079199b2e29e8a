"""Electrode equilibrium potentials.

Each electrode potential is a literature-shaped base curve in stoichiometry,
optionally translated in both axes, plus a local correction expressed in the
SoC domain:

    U*(theta) = U_lit(theta + a) + b + E(soc(theta))

Anode base (9 coefficients g0..g8):

    U_n(t) = sum_{i=0..5} g_i t^((i-2)/2) + g6 exp(g7 t) + g7 exp(g8 t)

Cathode base (7 coefficients g0..g6), two arctangent terms:

    U_p(t) = g0 + g1 atan(g2 + g3 t) + g4 atan(g5 + g6 t)
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import CurveDomainError, InvalidArgumentError

ANODE = "anode"
CATHODE = "cathode"
ELECTRODES = (ANODE, CATHODE)

GAUSSIANS = "sum_of_gaussians"
EXPONENTIALS = "sum_of_exponentials"

N_GAUSSIANS = 6
CORRECTION_LIMIT_V = 0.1

_ANODE_POWERS = (np.arange(6) - 2) / 2.0


def anode_literature(theta, coeffs):
    g = np.asarray(coeffs, dtype=float)
    if g.shape != (9,):
        raise InvalidArgumentError("anode curve needs 9 coefficients")
    t = np.asarray(theta, dtype=float)
    out = g[6] * np.exp(g[7] * t) + g[7] * np.exp(g[8] * t)
    for gi, p in zip(g[:6], _ANODE_POWERS):
        if gi != 0.0:
            out = out + gi * t**p
    return out


def cathode_literature(theta, coeffs):
    g = np.asarray(coeffs, dtype=float)
    if g.shape != (7,):
        raise InvalidArgumentError("cathode curve needs 7 coefficients")
    t = np.asarray(theta, dtype=float)
    return g[0] + g[1] * np.arctan(g[2] + g[3] * t) + g[4] * np.arctan(g[5] + g[6] * t)


def soc_to_stoich(electrode, soc, theta_0, theta_100):
    """Linear SoC -> stoichiometry map between the 0% and 100% limits."""
    return theta_0 + np.asarray(soc, dtype=float) * (theta_100 - theta_0)


def stoich_to_soc(electrode, theta, theta_0, theta_100):
    span = theta_100 - theta_0
    if span == 0:
        raise InvalidArgumentError(f"degenerate {electrode} stoichiometry limits")
    return (np.asarray(theta, dtype=float) - theta_0) / span


@dataclass(frozen=True)
class CorrectionTerm:
    """Local additive correction E(soc) of an electrode potential.

    ``theta_0``/``theta_100`` are the electrode limits used to map
    stoichiometry to SoC when the correction is embedded in a curve; they are
    frozen at fit time so the corrected curve is a fixed function of theta.
    """

    kind: str
    theta_0: float
    theta_100: float
    gauss_params: np.ndarray | None = None
    exp_params: np.ndarray | None = None

    def __post_init__(self):
        if self.kind == GAUSSIANS:
            g = np.asarray(self.gauss_params, dtype=float).reshape(-1, 3)
            if g.shape[0] > N_GAUSSIANS:
                raise InvalidArgumentError(f"at most {N_GAUSSIANS} gaussians")
            if np.any(g[:, 2] <= 0):
                raise InvalidArgumentError("gaussian widths must be positive")
            if g.shape[0] < N_GAUSSIANS:
                g = np.vstack([g, np.tile([0.0, 0.5, 0.1], (N_GAUSSIANS - g.shape[0], 1))])
            object.__setattr__(self, "gauss_params", g)
        elif self.kind == EXPONENTIALS:
            e = np.asarray(self.exp_params, dtype=float)
            if e.shape != (4,):
                raise InvalidArgumentError("sum_of_exponentials needs 4 parameters")
            object.__setattr__(self, "exp_params", e)
        else:
            raise InvalidArgumentError(f"unknown correction kind {self.kind!r}")
        if self.theta_100 == self.theta_0:
            raise InvalidArgumentError("degenerate anchor limits")
        peak = np.max(np.abs(self(np.linspace(0.0, 1.0, 1001))))
        if not np.isfinite(peak) or peak > CORRECTION_LIMIT_V:
            raise InvalidArgumentError(
                f"correction magnitude {peak:.4g} V exceeds {CORRECTION_LIMIT_V} V on [0, 1]"
            )

    def __call__(self, soc):
        s = np.asarray(soc, dtype=float)
        if self.kind == GAUSSIANS:
            g = self.gauss_params
            z = (g[:, 1] - s[..., None]) / g[:, 2]
            return np.sum(g[:, 0] * np.exp(-(z**2)), axis=-1)
        b1, b2, b3, b4 = self.exp_params
        return b1 * np.exp(b2 * s) + b3 * np.exp(b4 * s)

    def at_stoich(self, theta):
        return self((np.asarray(theta, dtype=float) - self.theta_0) / (self.theta_100 - self.theta_0))

    def to_dict(self):
        d = {"kind": self.kind, "theta_0": self.theta_0, "theta_100": self.theta_100}
        if self.kind == GAUSSIANS:
            d["gauss_params"] = self.gauss_params.tolist()
        else:
            d["exp_params"] = self.exp_params.tolist()
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(
            kind=d["kind"],
            theta_0=float(d["theta_0"]),
            theta_100=float(d["theta_100"]),
            gauss_params=d.get("gauss_params"),
            exp_params=d.get("exp_params"),
        )


@dataclass(frozen=True)
class EquilibriumCurve:
    electrode: str
    literature_coeffs: np.ndarray
    shift_a: float = 0.0
    shift_b: float = 0.0
    correction: CorrectionTerm | None = None
    diagnostics: tuple = field(default=(), compare=False)

    def __post_init__(self):
        if self.electrode not in ELECTRODES:
            raise InvalidArgumentError(f"electrode must be one of {ELECTRODES}")
        coeffs = np.asarray(self.literature_coeffs, dtype=float)
        expected = 9 if self.electrode == ANODE else 7
        if coeffs.shape != (expected,):
            raise InvalidArgumentError(f"{self.electrode} curve needs {expected} coefficients")
        coeffs.setflags(write=False)
        object.__setattr__(self, "literature_coeffs", coeffs)

    def literature(self, theta):
        if self.electrode == ANODE:
            return anode_literature(theta, self.literature_coeffs)
        return cathode_literature(theta, self.literature_coeffs)

    def __call__(self, theta):
        t = np.asarray(theta, dtype=float)
        if np.any(~np.isfinite(t)) or np.any(t <= 0.0) or np.any(t >= 1.0):
            bad = t[~((t > 0.0) & (t < 1.0))]
            raise CurveDomainError(
                f"{self.electrode} stoichiometry {float(bad.flat[0]) if bad.size else float('nan'):.6g} outside (0, 1)"
            )
        shifted = t + self.shift_a
        if self.electrode == ANODE and np.any(shifted <= 0.0):
            raise CurveDomainError(
                f"anode curve argument theta + a = {float(shifted.min()):.6g} is not positive"
            )
        out = self.literature(shifted) + self.shift_b
        if self.correction is not None:
            out = out + self.correction.at_stoich(t)
        if not np.all(np.isfinite(out)):
            raise CurveDomainError(f"{self.electrode} curve is not finite at the requested points")
        return out

    def with_changes(self, **kw):
        fields = dict(
            electrode=self.electrode,
            literature_coeffs=self.literature_coeffs,
            shift_a=self.shift_a,
            shift_b=self.shift_b,
            correction=self.correction,
        )
        fields.update(kw)
        return EquilibriumCurve(**fields)

    def monotonicity_report(self, theta_0, theta_100, n=1000):
        """Check the curve against its expected direction over the SoC window.

        In the SoC domain the anode potential must fall and the cathode
        potential must rise as SoC increases. Returns a list of messages; empty
        means the check passed.
        """
        soc = np.linspace(0.0, 1.0, n)
        theta = soc_to_stoich(self.electrode, soc, theta_0, theta_100)
        try:
            u = self(theta)
        except CurveDomainError as exc:
            return [str(exc)]
        du = np.diff(u)
        if self.electrode == ANODE:
            bad = np.flatnonzero(du > 0)
            direction = "decreasing"
        else:
            bad = np.flatnonzero(du < 0)
            direction = "increasing"
        if bad.size:
            return [
                f"{self.electrode} potential not monotone {direction} in SoC near "
                f"soc={soc[bad[0]]:.3f} ({bad.size} of {n - 1} intervals)"
            ]
        return []

    def checked(self, theta_0, theta_100):
        """Return a copy carrying monotonicity diagnostics; warns on violation."""
        msgs = tuple(self.monotonicity_report(theta_0, theta_100))
        for msg in msgs:
            warnings.warn(msg, RuntimeWarning, stacklevel=2)
        out = self.with_changes()
        object.__setattr__(out, "diagnostics", msgs)
        return out

    def to_dict(self):
        return {
            "electrode": self.electrode,
            "literature_coeffs": self.literature_coeffs.tolist(),
            "shift_a": self.shift_a,
            "shift_b_v": self.shift_b,
            "correction": None if self.correction is None else self.correction.to_dict(),
        }

    @classmethod
    def from_dict(cls, d):
        corr = d.get("correction")
        return cls(
            electrode=d["electrode"],
            literature_coeffs=d["literature_coeffs"],
            shift_a=float(d.get("shift_a", 0.0)),
            shift_b=float(d.get("shift_b_v", 0.0)),
            correction=None if corr is None else CorrectionTerm.from_dict(corr),
        )
