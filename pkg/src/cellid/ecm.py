"""Second-order RC equivalent circuit model.

    V = OCV(soc) - R0(soc) I - v1 - v2
    dv_i/dt = -v_i / (R_i C_i) + I / C_i

Each branch is advanced with its exact zero-order-hold update, with R and C
frozen at the SoC of the interval start.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import InvalidArgumentError, RangeError
from .spm import SimulationResult

CONSTANT = "constant"
EXPONENTIAL = "exponential"
SOC_TOLERANCE = 0.01


@dataclass(frozen=True)
class SocFunction:
    """f(soc) = base + amp * exp(rate * soc)."""

    kind: str
    base: float
    amp: float = 0.0
    rate: float = 0.0

    def __post_init__(self):
        if self.kind not in (CONSTANT, EXPONENTIAL):
            raise InvalidArgumentError(f"unknown SocFunction kind {self.kind!r}")
        if self.kind == CONSTANT and self.amp != 0.0:
            raise InvalidArgumentError("constant SocFunction must have amp = 0")
        vals = self(np.array([0.0, 1.0]))
        if not np.all(np.isfinite(vals)):
            raise InvalidArgumentError("SocFunction is not finite on [0, 1]")

    @classmethod
    def constant(cls, value):
        return cls(CONSTANT, float(value))

    @classmethod
    def exponential(cls, base, amp, rate):
        return cls(EXPONENTIAL, float(base), float(amp), float(rate))

    def __call__(self, soc):
        return self.base + self.amp * np.exp(self.rate * np.asarray(soc, dtype=float))

    def min_on_unit(self):
        # base + amp exp(rate s) is monotone, so the extremes sit at the ends
        return float(min(self(0.0), self(1.0)))

    def to_dict(self, unit):
        return {"kind": self.kind, f"base_{unit}": self.base, f"amp_{unit}": self.amp,
                "rate": self.rate}

    @classmethod
    def from_dict(cls, d, unit):
        return cls(d["kind"], float(d[f"base_{unit}"]), float(d[f"amp_{unit}"]), float(d["rate"]))


@dataclass(frozen=True)
class OcvMap:
    """Monotone cubic (PCHIP) interpolant through (soc, ocv) points."""

    soc: np.ndarray
    ocv: np.ndarray
    _interp: object = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        s = np.asarray(self.soc, dtype=float)
        v = np.asarray(self.ocv, dtype=float)
        if s.ndim != 1 or s.shape != v.shape or s.size < 2:
            raise InvalidArgumentError("OCV map needs matching 1-D arrays with >= 2 points")
        order = np.argsort(s)
        s, v = s[order], v[order]
        if np.any(np.diff(s) <= 0):
            raise InvalidArgumentError("OCV map SoC values must be distinct")
        object.__setattr__(self, "soc", s)
        object.__setattr__(self, "ocv", v)
        object.__setattr__(self, "_interp", PchipInterpolator(s, v, extrapolate=True))

    def __call__(self, soc):
        s = np.asarray(soc, dtype=float)
        if np.any(s < -SOC_TOLERANCE) or np.any(s > 1.0 + SOC_TOLERANCE):
            bad = s[(s < -SOC_TOLERANCE) | (s > 1.0 + SOC_TOLERANCE)]
            raise RangeError(f"soc {float(bad.flat[0]):.6g} outside the OCV map domain [0, 1]")
        return self._interp(s)

    def to_dict(self):
        return {"soc": self.soc.tolist(), "ocv_v": self.ocv.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["soc"]), np.asarray(d["ocv_v"]))


@dataclass(frozen=True)
class EcmParameters:
    ocv_map: OcvMap
    r0: SocFunction
    r1: SocFunction
    c1: SocFunction
    r2: SocFunction
    c2: SocFunction
    q_nom: float
    variant: str = "ecm"

    def __post_init__(self):
        if not self.q_nom > 0:
            raise InvalidArgumentError("q_nom must be positive")
        for name in ("r0", "r1", "c1", "r2", "c2"):
            if getattr(self, name).min_on_unit() <= 0:
                raise InvalidArgumentError(f"{name} must be strictly positive on [0, 1]")

    def branches(self):
        return ((self.r1, self.c1), (self.r2, self.c2))

    def to_dict(self):
        return {
            "variant": self.variant,
            "q_nom_ah": self.q_nom,
            "ocv_map": self.ocv_map.to_dict(),
            "r0": self.r0.to_dict("ohm"),
            "r1": self.r1.to_dict("ohm"),
            "c1": self.c1.to_dict("f"),
            "r2": self.r2.to_dict("ohm"),
            "c2": self.c2.to_dict("f"),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            ocv_map=OcvMap.from_dict(d["ocv_map"]),
            r0=SocFunction.from_dict(d["r0"], "ohm"),
            r1=SocFunction.from_dict(d["r1"], "ohm"),
            c1=SocFunction.from_dict(d["c1"], "f"),
            r2=SocFunction.from_dict(d["r2"], "ohm"),
            c2=SocFunction.from_dict(d["c2"], "f"),
            q_nom=float(d["q_nom_ah"]),
            variant=d.get("variant", "ecm"),
        )


@dataclass(frozen=True)
class EcmState:
    v_c1: float = 0.0
    v_c2: float = 0.0
    soc: float = 1.0
    time: float = 0.0


def _check_soc(soc, time=None):
    if not (-SOC_TOLERANCE <= soc <= 1.0 + SOC_TOLERANCE):
        where = "" if time is None else f" at t={time:g} s"
        raise RangeError(f"soc {soc:.6g} outside [-0.01, 1.01]{where}")


def ecm_step(params, state, current, dt):
    if not dt > 0:
        raise InvalidArgumentError(f"dt must be positive, got {dt!r}")
    _check_soc(state.soc, state.time)
    v = []
    for (rf, cf), vc in zip(params.branches(), (state.v_c1, state.v_c2)):
        r = float(rf(state.soc))
        a = np.exp(-dt / (r * float(cf(state.soc))))
        v.append(a * vc + r * (1.0 - a) * current)
    soc = state.soc - current * dt / (3600.0 * params.q_nom)
    _check_soc(soc, state.time + dt)
    return EcmState(v[0], v[1], soc, state.time + dt)


def ecm_voltage(params, state, current):
    ocv = float(params.ocv_map(state.soc))
    return ocv - float(params.r0(state.soc)) * current - state.v_c1 - state.v_c2


def _branch(a, gain, current):
    # v[k+1] = a[k] v[k] + gain[k] I[k]; v[0] = 0
    out = np.empty(len(current))
    v = 0.0
    for k, (ak, gk, ik) in enumerate(zip(a.tolist(), gain.tolist(), current.tolist())):
        out[k] = v
        v = ak * v + gk * ik
    return out, v


def ecm_simulate(params, initial_soc, profile):
    """Simulate from rest (zero branch voltages) at ``initial_soc``."""
    if not (0.0 <= initial_soc <= 1.0):
        raise InvalidArgumentError(f"initial soc must be in [0, 1], got {initial_soc!r}")
    dt = float(profile.dt)
    current = np.asarray(profile.samples, dtype=float)
    n = current.size
    soc = initial_soc - np.concatenate(([0.0], np.cumsum(current)[:-1])) * dt / (3600.0 * params.q_nom)
    soc_end = initial_soc
    if n:
        soc_end = soc[-1] - current[-1] * dt / (3600.0 * params.q_nom)
        lo, hi = min(soc.min(), soc_end), max(soc.max(), soc_end)
        if lo < -SOC_TOLERANCE or hi > 1.0 + SOC_TOLERANCE:
            k = int(np.flatnonzero((soc < -SOC_TOLERANCE) | (soc > 1 + SOC_TOLERANCE))[0]) \
                if np.any((soc < -SOC_TOLERANCE) | (soc > 1 + SOC_TOLERANCE)) else n
            raise RangeError(f"soc leaves [-0.01, 1.01] at sample {k}")
    branch_v, ends = [], []
    for rf, cf in params.branches():
        r = rf(soc)
        a = np.exp(-dt / (r * cf(soc)))
        out, v_end = _branch(a, r * (1.0 - a), current)
        branch_v.append(out)
        ends.append(v_end)
    voltage = params.ocv_map(soc) - params.r0(soc) * current - branch_v[0] - branch_v[1]
    return SimulationResult(
        times=np.arange(n) * dt,
        current=current,
        voltage=voltage,
        soc=soc,
        flags=np.zeros(n, dtype=np.int8),
        violation=np.zeros(n),
        final_state=EcmState(ends[0], ends[1], float(soc_end) if n else initial_soc, n * dt),
        model=params.variant,
    )
