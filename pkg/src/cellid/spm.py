"""Single Particle Model: parameters, output map and time-domain simulation.

Sign conventions: current I > 0 is a discharge. The anode surface flux is
j_n = I r_n / (3 V_n F) (positive, lithium leaves the particle) and the
cathode flux is j_p = -I r_p / (3 V_p F). Overpotentials carry the sign of
their flux, so the terminal voltage is

    V = (U_p + eta_p) - (U_n + eta_n) - R_f I

which lowers V under discharge for both electrodes.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .curves import ANODE, CATHODE, EquilibriumCurve
from .errors import CurveDomainError, InvalidArgumentError, NumericalError, SaturationError
from .spectral import DEFAULT_NODES, build_diffusion_operator, volume_average, zoh_discretize

FARADAY = 96485.33  # C/mol
GAS_CONSTANT = 8.314  # J/(mol K)

# Flag values in SimulationResult.flags.
OK, NEAR_LIMIT, CLIPPED = 0, 1, 2
NEAR_LIMIT_MARGIN = 0.01
CLIP_EPS = 1e-6


def electrode_volume(volume_fraction, area, thickness):
    """Active electrode volume V = eps * A * delta (m^3)."""
    return volume_fraction * area * thickness


@dataclass(frozen=True)
class StoichLimits:
    theta_n_0: float
    theta_n_100: float
    theta_p_0: float
    theta_p_100: float

    def __post_init__(self):
        if not (0.0 <= self.theta_n_0 <= self.theta_n_100 <= 1.0):
            raise InvalidArgumentError(
                f"anode limits must satisfy 0 <= theta_n_0 <= theta_n_100 <= 1, got "
                f"({self.theta_n_0}, {self.theta_n_100})"
            )
        if not (0.0 <= self.theta_p_100 <= self.theta_p_0 <= 1.0):
            raise InvalidArgumentError(
                f"cathode limits must satisfy 0 <= theta_p_100 <= theta_p_0 <= 1, got "
                f"({self.theta_p_100}, {self.theta_p_0})"
            )

    def as_array(self):
        return np.array([self.theta_n_0, self.theta_p_0, self.theta_n_100, self.theta_p_100])


def stoich_from_soc(limits, soc):
    """(theta_n, theta_p) for a SoC value or array."""
    if limits.theta_n_0 == limits.theta_n_100 or limits.theta_p_0 == limits.theta_p_100:
        raise InvalidArgumentError("degenerate stoichiometry limits")
    soc = np.asarray(soc, dtype=float)
    theta_n = limits.theta_n_0 + soc * (limits.theta_n_100 - limits.theta_n_0)
    theta_p = limits.theta_p_0 + soc * (limits.theta_p_100 - limits.theta_p_0)
    return theta_n, theta_p


def soc_from_stoich(limits, theta_n=None, theta_p=None):
    if (theta_n is None) == (theta_p is None):
        raise InvalidArgumentError("give exactly one of theta_n, theta_p")
    if theta_n is not None:
        span = limits.theta_n_100 - limits.theta_n_0
        if span == 0:
            raise InvalidArgumentError("degenerate anode limits")
        return (np.asarray(theta_n, dtype=float) - limits.theta_n_0) / span
    span = limits.theta_p_100 - limits.theta_p_0
    if span == 0:
        raise InvalidArgumentError("degenerate cathode limits")
    return (np.asarray(theta_p, dtype=float) - limits.theta_p_0) / span


@dataclass(frozen=True)
class CellParameters:
    v_n: float
    v_p: float
    r_sn: float
    r_sp: float
    d_sn: float
    d_sp: float
    k_n: float
    k_p: float
    r_f: float
    c_smax_n: float
    c_smax_p: float
    c_e_avg: float
    theta_n_0: float
    theta_n_100: float
    theta_p_0: float
    theta_p_100: float
    q_nom: float
    anode: EquilibriumCurve
    cathode: EquilibriumCurve
    temperature: float = 298.15
    n_nodes: int = DEFAULT_NODES

    def __post_init__(self):
        positive = ("v_n", "v_p", "r_sn", "r_sp", "d_sn", "d_sp", "k_n", "k_p",
                    "c_smax_n", "c_smax_p", "c_e_avg", "q_nom", "temperature")
        for name in positive:
            val = getattr(self, name)
            if not (np.isfinite(val) and val > 0):
                raise InvalidArgumentError(f"{name} must be positive and finite, got {val!r}")
        if not (np.isfinite(self.r_f) and self.r_f >= 0):
            raise InvalidArgumentError(f"r_f must be non-negative, got {self.r_f!r}")
        self.limits  # validates ordering
        if self.anode.electrode != ANODE or self.cathode.electrode != CATHODE:
            raise InvalidArgumentError("anode/cathode curves assigned to the wrong electrode")

    @property
    def limits(self):
        return StoichLimits(self.theta_n_0, self.theta_n_100, self.theta_p_0, self.theta_p_100)

    def with_limits(self, limits):
        return replace(self, theta_n_0=limits.theta_n_0, theta_n_100=limits.theta_n_100,
                       theta_p_0=limits.theta_p_0, theta_p_100=limits.theta_p_100)

    def curve(self, electrode):
        return self.anode if electrode == ANODE else self.cathode

    def c_smax(self, electrode):
        return self.c_smax_n if electrode == ANODE else self.c_smax_p

    def k(self, electrode):
        return self.k_n if electrode == ANODE else self.k_p

    def operator(self, electrode):
        if electrode == ANODE:
            return build_diffusion_operator(self.n_nodes, self.r_sn, self.d_sn)
        return build_diffusion_operator(self.n_nodes, self.r_sp, self.d_sp)

    def ocv(self, soc):
        """Open-circuit voltage U_p - U_n at uniform (relaxed) concentrations."""
        theta_n, theta_p = stoich_from_soc(self.limits, soc)
        return self.cathode(theta_p) - self.anode(theta_n)

    def check_curves(self):
        """Monotonicity diagnostics of both curves over the active window."""
        return (self.anode.monotonicity_report(self.theta_n_0, self.theta_n_100)
                + self.cathode.monotonicity_report(self.theta_p_0, self.theta_p_100))


def flux_gains(params):
    """Per-ampere surface fluxes (j_n/I, j_p/I) in mol/(m^2 s A)."""
    return (params.r_sn / (3.0 * params.v_n * FARADAY),
            -params.r_sp / (3.0 * params.v_p * FARADAY))


def molar_flux(params, current):
    gn, gp = flux_gains(params)
    current = np.asarray(current, dtype=float)
    return gn * current, gp * current


def exchange_current(params, electrode, surface_conc):
    cmax = params.c_smax(electrode)
    c = np.asarray(surface_conc, dtype=float)
    return params.k(electrode) * np.sqrt(params.c_e_avg * (cmax - c) * c)


def _bv(params, electrode, c_ss, flux):
    i0 = exchange_current(params, electrode, c_ss)
    scale = 2.0 * GAS_CONSTANT * params.temperature / FARADAY
    return scale * np.arcsinh(FARADAY * np.asarray(flux) / (2.0 * i0))


def overpotential(params, electrode, surface_conc, flux, time=None):
    """Butler-Volmer overpotential for the given surface concentration and flux."""
    c = np.asarray(surface_conc, dtype=float)
    cmax = params.c_smax(electrode)
    bad = np.flatnonzero(~((c > 0.0) & (c < cmax)).ravel())
    if bad.size:
        idx = int(bad[0])
        raise SaturationError(electrode, time=time, index=idx if c.ndim else None,
                              stoich=float(c.ravel()[idx] / cmax))
    return _bv(params, electrode, c, flux)


@dataclass(frozen=True)
class SpmState:
    """Nodal concentrations (surface first, centre last), SoC and time."""

    conc_n: np.ndarray
    conc_p: np.ndarray
    soc: float
    time: float = 0.0


def initial_state(params, soc):
    if not (0.0 <= soc <= 1.0):
        raise InvalidArgumentError(f"initial soc must be in [0, 1], got {soc!r}")
    theta_n, theta_p = stoich_from_soc(params.limits, soc)
    n = params.n_nodes
    return SpmState(
        conc_n=np.full(n, float(theta_n) * params.c_smax_n),
        conc_p=np.full(n, float(theta_p) * params.c_smax_p),
        soc=float(soc),
        time=0.0,
    )


def _check_surface(params, c_n, c_p, time=None, index=None):
    for electrode, c in ((ANODE, c_n), (CATHODE, c_p)):
        cmax = params.c_smax(electrode)
        if not (0.0 < c < cmax):
            raise SaturationError(electrode, time=time, index=index, stoich=float(c / cmax))


def _output(params, theta_n, theta_p, c_n, c_p, j_n, j_p, current):
    u_p = params.cathode(theta_p)
    u_n = params.anode(theta_n)
    eta_n = _bv(params, ANODE, c_n, j_n)
    eta_p = _bv(params, CATHODE, c_p, j_p)
    volt = (u_p + eta_p) - (u_n + eta_n) - params.r_f * np.asarray(current)
    return volt, eta_n, eta_p


def terminal_voltage(params, state, current):
    j_n, j_p = molar_flux(params, current)
    op_n = params.operator(ANODE)
    op_p = params.operator(CATHODE)
    c_n = float(op_n.surface(state.conc_n[1:], j_n))
    c_p = float(op_p.surface(state.conc_p[1:], j_p))
    _check_surface(params, c_n, c_p, time=state.time)
    volt, _, _ = _output(params, c_n / params.c_smax_n, c_p / params.c_smax_p,
                         c_n, c_p, j_n, j_p, current)
    return float(volt)


def step(params, state, current, dt):
    """Advance one zero-order-hold interval of constant ``current``."""
    if not dt > 0:
        raise InvalidArgumentError(f"dt must be positive, got {dt!r}")
    j_n, j_p = molar_flux(params, current)
    new = {}
    for electrode, conc, j in ((ANODE, state.conc_n, j_n), (CATHODE, state.conc_p, j_p)):
        op = params.operator(electrode)
        ad, bd = op.discretize(dt)
        y = ad @ conc[1:] + bd[:, 0] * j
        if not np.all(np.isfinite(y)):
            raise NumericalError(f"non-finite {electrode} state at t={state.time + dt:g} s")
        # Stored surface value is consistent with the flux just applied.
        new[electrode] = op.profile(y, j)
    t_new = state.time + dt
    _check_surface(params, new[ANODE][0], new[CATHODE][0], time=t_new)
    return SpmState(
        conc_n=new[ANODE],
        conc_p=new[CATHODE],
        soc=state.soc - current * dt / (3600.0 * params.q_nom),
        time=t_new,
    )


@dataclass(frozen=True)
class SimulationResult:
    """Sampled model outputs; sample k holds the state at t_k with current I_k applied."""

    times: np.ndarray
    current: np.ndarray
    voltage: np.ndarray
    soc: np.ndarray
    surface_stoich_n: np.ndarray | None = None
    surface_stoich_p: np.ndarray | None = None
    bulk_stoich_n: np.ndarray | None = None
    bulk_stoich_p: np.ndarray | None = None
    overpotential_n: np.ndarray | None = None
    overpotential_p: np.ndarray | None = None
    flags: np.ndarray | None = None
    violation: np.ndarray | None = None
    conc_n: np.ndarray | None = field(default=None, repr=False)
    conc_p: np.ndarray | None = field(default=None, repr=False)
    final_state: object = field(default=None, repr=False)
    model: str = "spm"

    def __len__(self):
        return len(self.times)

    @property
    def saturated(self):
        return self.flags is not None and bool(np.any(self.flags == CLIPPED))


def _trajectory(ad, bd, y0, u):
    n_samples = len(u)
    out = np.empty((n_samples, len(y0)))
    y = y0
    for k in range(n_samples):
        out[k] = y
        y = ad @ y + bd * u[k]
    return out, y


def simulate(params, initial_soc, profile, on_saturation="raise", keep_profiles=True,
             clip_eps=CLIP_EPS):
    """Simulate a sampled current profile from a relaxed cell at ``initial_soc``.

    ``on_saturation="clip"`` keeps going when a surface stoichiometry leaves
    (0, 1): the output map sees a clipped value, the sample is flagged
    ``CLIPPED`` and the excursion depth is reported in ``violation``. The
    clip margin is ``clip_eps`` in stoichiometry. The default raises
    :class:`SaturationError`.
    """
    if on_saturation not in ("raise", "clip"):
        raise InvalidArgumentError("on_saturation must be 'raise' or 'clip'")
    dt = float(profile.dt)
    current = np.asarray(profile.samples, dtype=float)
    if not np.all(np.isfinite(current)):
        raise InvalidArgumentError("profile contains non-finite samples")
    n_samples = len(current)
    state0 = initial_state(params, initial_soc)

    op_n = params.operator(ANODE)
    op_p = params.operator(CATHODE)
    gn, gp = flux_gains(params)
    ad_n, bd_n = op_n.discretize(dt)
    ad_p, bd_p = op_p.discretize(dt)
    m = op_n.n_states
    ad = np.zeros((2 * m, 2 * m))
    ad[:m, :m] = ad_n
    ad[m:, m:] = ad_p
    bd = np.concatenate((bd_n[:, 0] * gn, bd_p[:, 0] * gp))
    y0 = np.concatenate((state0.conc_n[1:], state0.conc_p[1:]))

    traj, y_end = _trajectory(ad, bd, y0, current)
    if not (np.all(np.isfinite(traj)) and np.all(np.isfinite(y_end))):
        raise NumericalError("non-finite concentration trajectory")
    yn, yp = traj[:, :m], traj[:, m:]
    j_n, j_p = gn * current, gp * current
    surf_n = op_n.surface(yn, j_n)
    surf_p = op_p.surface(yp, j_p)
    theta_n = surf_n / params.c_smax_n
    theta_p = surf_p / params.c_smax_p
    times = np.arange(n_samples) * dt

    flags = np.zeros(n_samples, dtype=np.int8)
    violation = np.zeros(n_samples)
    for theta in (theta_n, theta_p):
        near = (theta < NEAR_LIMIT_MARGIN) | (theta > 1.0 - NEAR_LIMIT_MARGIN)
        flags[near] = NEAR_LIMIT
    out_of_range = {}
    for electrode, theta in ((ANODE, theta_n), (CATHODE, theta_p)):
        bad = ~((theta > 0.0) & (theta < 1.0))
        if np.any(bad):
            out_of_range[electrode] = bad
    if out_of_range and on_saturation == "raise":
        k, electrode = min((int(np.flatnonzero(b)[0]), e) for e, b in out_of_range.items())
        theta = theta_n if electrode == ANODE else theta_p
        raise SaturationError(electrode, time=float(times[k]), index=k, stoich=float(theta[k]))
    if on_saturation == "clip":
        # The output map sees stoichiometries inside [clip_eps, 1 - clip_eps];
        # ``violation`` is the distance beyond that band.
        lo, hi = clip_eps, 1.0 - clip_eps
        for theta in (theta_n, theta_p):
            violation += np.maximum(0.0, lo - theta) + np.maximum(0.0, theta - hi)
        for b in out_of_range.values():
            flags[b] = CLIPPED
        theta_n = np.clip(theta_n, lo, hi)
        theta_p = np.clip(theta_p, lo, hi)
        try:
            volt, eta_n, eta_p = _output(params, theta_n, theta_p, theta_n * params.c_smax_n,
                                         theta_p * params.c_smax_p, j_n, j_p, current)
        except CurveDomainError:
            volt = np.full(n_samples, np.nan)
            eta_n = eta_p = volt
    else:
        volt, eta_n, eta_p = _output(params, theta_n, theta_p, surf_n, surf_p, j_n, j_p, current)

    prof_n = np.column_stack((surf_n, yn)) if keep_profiles else None
    prof_p = np.column_stack((surf_p, yp)) if keep_profiles else None
    bulk_n = (yn @ op_n.avg_weights[1:] + op_n.avg_weights[0] * op_n.surface(yn, j_n)) / params.c_smax_n
    bulk_p = (yp @ op_p.avg_weights[1:] + op_p.avg_weights[0] * op_p.surface(yp, j_p)) / params.c_smax_p
    soc = initial_soc - np.concatenate(([0.0], np.cumsum(current)[:-1])) * dt / (3600.0 * params.q_nom)
    soc_end = initial_soc - current.sum() * dt / (3600.0 * params.q_nom)
    final = SpmState(
        conc_n=op_n.profile(y_end[:m], 0.0),
        conc_p=op_p.profile(y_end[m:], 0.0),
        soc=float(soc_end),
        time=n_samples * dt,
    )
    return SimulationResult(
        times=times,
        current=current,
        voltage=np.asarray(volt, dtype=float),
        soc=soc,
        surface_stoich_n=theta_n,
        surface_stoich_p=theta_p,
        bulk_stoich_n=bulk_n,
        bulk_stoich_p=bulk_p,
        overpotential_n=np.asarray(eta_n, dtype=float),
        overpotential_p=np.asarray(eta_p, dtype=float),
        flags=flags,
        violation=violation,
        conc_n=prof_n,
        conc_p=prof_p,
        final_state=final,
        model="spm",
    )


def relaxed_volume_average(params, electrode, conc):
    """Volume-average concentration of a nodal profile of ``electrode``."""
    return float(volume_average(params.operator(electrode), conc))


__all__ = [
    "FARADAY", "GAS_CONSTANT", "CellParameters", "SpmState", "SimulationResult", "StoichLimits",
    "electrode_volume", "molar_flux", "overpotential", "exchange_current", "terminal_voltage",
    "step", "simulate", "stoich_from_soc", "soc_from_stoich", "initial_state", "flux_gains",
    "zoh_discretize",
]
