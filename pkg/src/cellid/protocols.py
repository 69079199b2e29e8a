"""Excitation profiles and synthetic datasets.

Currents are in amperes, positive for discharge. Every generator is a pure
function of its arguments (noise generators take an explicit seed).
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidArgumentError, SizeError

MAX_SAMPLES = 10_000_000


@dataclass(frozen=True)
class CurrentProfile:
    dt: float
    samples: np.ndarray
    label: str = ""
    c_rate_base: float = 1.0
    band: float | None = None  # declared max C-rate, if any

    def __post_init__(self):
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise InvalidArgumentError(f"dt must be positive, got {self.dt!r}")
        s = np.asarray(self.samples, dtype=float)
        if s.ndim != 1 or not np.all(np.isfinite(s)):
            raise InvalidArgumentError("samples must be a finite 1-D array")
        if not self.c_rate_base > 0:
            raise InvalidArgumentError("c_rate_base must be positive")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)
        if self.band is not None and self.max_c_rate > self.band + 1e-12:
            raise InvalidArgumentError(
                f"profile {self.label!r} peaks at {self.max_c_rate:.3f}C above its {self.band}C band"
            )

    def __len__(self):
        return self.samples.size

    @property
    def duration(self):
        return self.samples.size * self.dt

    @property
    def times(self):
        return np.arange(self.samples.size) * self.dt

    @property
    def charge_ah(self):
        """Net discharged charge in Ah."""
        return float(self.samples.sum() * self.dt / 3600.0)

    @property
    def max_c_rate(self):
        return float(np.max(np.abs(self.samples)) / self.c_rate_base) if self.samples.size else 0.0


@dataclass(frozen=True)
class NoiseSpec:
    sigma_v: float = 0.0
    sigma_i: float = 0.0

    def __post_init__(self):
        if self.sigma_v < 0 or self.sigma_i < 0:
            raise InvalidArgumentError("noise standard deviations must be >= 0")

    @property
    def is_none(self):
        return self.sigma_v == 0 and self.sigma_i == 0


@dataclass(frozen=True)
class Dataset:
    profile: CurrentProfile
    voltage: np.ndarray
    initial_soc: float
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    provenance: str = "external-file"
    seed: int | None = None

    def __post_init__(self):
        v = np.asarray(self.voltage, dtype=float)
        if v.shape != self.profile.samples.shape:
            raise InvalidArgumentError(
                f"voltage length {v.size} does not match {self.profile.samples.size} current samples"
            )
        v.setflags(write=False)
        object.__setattr__(self, "voltage", v)

    @property
    def dt(self):
        return self.profile.dt

    @property
    def current(self):
        return self.profile.samples

    @property
    def times(self):
        return self.profile.times

    @property
    def label(self):
        return self.profile.label

    def soc(self, q_nom):
        """Coulomb-counting SoC at every sample (state before the sample's current)."""
        charge = np.concatenate(([0.0], np.cumsum(self.current)[:-1])) * self.dt
        return self.initial_soc - charge / (3600.0 * q_nom)


def _n(duration, dt):
    n = int(round(duration / dt))
    if n > MAX_SAMPLES:
        raise SizeError(f"profile would need {n} samples (limit {MAX_SAMPLES})")
    return n


def gen_pdt(q_nom, pulse_c_rate=1.0, pulse_soc_step=0.05, rest_duration=1800.0, dt=1.0,
            initial_rest=60.0):
    """Pulse discharge test: pulse/rest blocks from full to empty.

    Each pulse removes ``pulse_soc_step`` of capacity at ``pulse_c_rate``; the
    last pulse is shortened if the step does not divide 1. A short leading
    rest (below the 300 s rest-detection threshold) makes the first pulse edge
    observable.
    """
    if not (0.0 < pulse_soc_step <= 1.0):
        raise InvalidArgumentError("pulse_soc_step must be in (0, 1]")
    if rest_duration < 600.0:
        raise InvalidArgumentError("rest_duration must be >= 600 s")
    if pulse_c_rate <= 0 or q_nom <= 0 or dt <= 0 or initial_rest < 0:
        raise InvalidArgumentError("pulse_c_rate, q_nom and dt must be positive")
    n_pulses = math.ceil(1.0 / pulse_soc_step - 1e-9)
    current = pulse_c_rate * q_nom
    n_rest = _n(rest_duration, dt)
    n_lead = _n(initial_rest, dt)
    total_pulse = _n(3600.0 / pulse_c_rate, dt)
    if n_lead + total_pulse + n_pulses * n_rest > MAX_SAMPLES:
        raise SizeError("PDT profile exceeds the sample limit")
    blocks = [np.zeros(n_lead)]
    done = 0
    for k in range(n_pulses):
        target = min(total_pulse, int(round((k + 1) * pulse_soc_step * 3600.0 / pulse_c_rate / dt)))
        blocks.append(np.full(target - done, current))
        blocks.append(np.zeros(n_rest))
        done = target
    return CurrentProfile(dt=dt, samples=np.concatenate(blocks), label="pdt",
                          c_rate_base=q_nom, band=pulse_c_rate)


def gen_constant(c_rate, q_nom, dt=1.0, soc_span=1.0, label=None):
    if c_rate <= 0 or q_nom <= 0:
        raise InvalidArgumentError("c_rate and q_nom must be positive")
    n = _n(soc_span * 3600.0 / c_rate, dt)
    return CurrentProfile(dt=dt, samples=np.full(n, c_rate * q_nom),
                          label=label or f"{c_rate:g}c", c_rate_base=q_nom, band=c_rate)


def gen_noise_discharge(seed, mean_c_rate, peak_c_rate, bandwidth_hz=0.02, dt=1.0,
                        duration=3600.0, q_nom=3.2, std_c_rate=None, label="wn"):
    """Band-limited noise current around a mean discharge level, clipped at +/- peak.

    White gaussian samples go through a first-order low-pass with corner
    ``bandwidth_hz`` and are rescaled to unit variance before being scaled
    to ``std_c_rate`` (default: (peak - mean) / 2).
    """
    if not (0.0 <= mean_c_rate <= peak_c_rate):
        raise InvalidArgumentError("need 0 <= mean_c_rate <= peak_c_rate")
    if bandwidth_hz <= 0 or dt <= 0 or q_nom <= 0:
        raise InvalidArgumentError("bandwidth_hz, dt and q_nom must be positive")
    if std_c_rate is None:
        std_c_rate = 0.5 * (peak_c_rate - mean_c_rate)
    if std_c_rate < 0:
        raise InvalidArgumentError("std_c_rate must be >= 0")
    n = _n(duration, dt)
    rng = np.random.default_rng(seed)
    white = rng.standard_normal(n)
    a = math.exp(-2.0 * math.pi * bandwidth_hz * dt)
    gain = math.sqrt((1.0 + a) / (1.0 - a))
    filtered = np.empty(n)
    acc = 0.0
    for k in range(n):
        acc = a * acc + (1.0 - a) * gain * white[k]
        filtered[k] = acc
    c_rate = mean_c_rate + std_c_rate * filtered
    c_rate = np.clip(c_rate, -peak_c_rate, peak_c_rate)
    return CurrentProfile(dt=dt, samples=c_rate * q_nom, label=label, c_rate_base=q_nom,
                          band=peak_c_rate)


# Validation suite: (mean C, std C, peak C, duration s, seed) per test id.
VALIDATION_SPECS = {
    "lc1": (0.5, 0.3, 1.0, 4320.0, 101),
    "lc2": (0.5, 0.3, 1.0, 4320.0, 102),
    "mc1": (1.0, 0.6, 2.0, 2160.0, 201),
    "mc2": (1.0, 0.6, 2.0, 2160.0, 202),
    "hc1": (1.5, 0.9, 3.0, 1440.0, 301),
    "hc2": (1.5, 0.9, 3.0, 1440.0, 302),
}
IDENT_WN_SPEC = (0.8, 0.5, 2.0, 3600.0, 11)


def gen_validation(test_id, q_nom, dt=1.0, seed=None, bandwidth_hz=0.02):
    mean, std, peak, duration, default_seed = VALIDATION_SPECS[test_id]
    return gen_noise_discharge(default_seed if seed is None else seed, mean, peak, bandwidth_hz,
                               dt, duration, q_nom, std_c_rate=std, label=test_id)


def gen_ident_noise(q_nom, dt=1.0, seed=None, bandwidth_hz=0.02):
    mean, std, peak, duration, default_seed = IDENT_WN_SPEC
    return gen_noise_discharge(default_seed if seed is None else seed, mean, peak, bandwidth_hz,
                               dt, duration, q_nom, std_c_rate=std, label="wn")


def simulate_model(model, initial_soc, profile):
    """Dispatch to the SPM or ECM simulator depending on the parameter type."""
    from . import ecm, spm

    if isinstance(model, ecm.EcmParameters):
        return ecm.ecm_simulate(model, initial_soc, profile)
    return spm.simulate(model, initial_soc, profile, keep_profiles=False)


def synthesize_dataset(truth, profile, initial_soc, noise=None, seed=0, truth_id="truth"):
    """Simulate ``truth`` on ``profile`` and add seeded measurement noise.

    The voltage noise and the current noise use independent streams of the
    same generator, so the clean component never depends on the seed.
    """
    noise = noise or NoiseSpec()
    clean = simulate_model(truth, initial_soc, profile).voltage
    rng = np.random.default_rng(seed)
    dv = rng.standard_normal(clean.size)
    di = rng.standard_normal(clean.size)
    voltage = clean + noise.sigma_v * dv if noise.sigma_v > 0 else clean
    measured = profile
    if noise.sigma_i > 0:
        measured = replace(profile, samples=profile.samples + noise.sigma_i * di, band=None)
    return Dataset(profile=measured, voltage=voltage, initial_soc=float(initial_soc), noise=noise,
                   provenance=f"synthetic({truth_id})", seed=seed)
