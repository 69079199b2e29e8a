from dataclasses import replace

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cellid import truth
from cellid.curves import ANODE, CATHODE
from cellid.errors import InvalidArgumentError, SaturationError
from cellid.protocols import CurrentProfile, gen_constant
from cellid.spm import (CLIPPED, FARADAY, GAS_CONSTANT, StoichLimits, exchange_current, flux_gains,
                        initial_state, molar_flux, overpotential, relaxed_volume_average, simulate,
                        soc_from_stoich, step, stoich_from_soc, terminal_voltage)
from oracles import rk4


@pytest.fixture(scope="module")
def cell():
    return truth.true_cell()


def _pulse(current, n, dt=1.0):
    return CurrentProfile(dt, np.full(n, float(current)))


def test_truth_curves_are_monotone(cell):
    assert cell.check_curves() == []


def test_limits_validation():
    with pytest.raises(InvalidArgumentError):
        StoichLimits(0.5, 0.2, 0.9, 0.1)
    with pytest.raises(InvalidArgumentError):
        StoichLimits(0.1, 0.8, 0.1, 0.9)


@settings(max_examples=50, deadline=None)
@given(soc=st.floats(0.0, 1.0))
def test_soc_stoich_round_trip(soc):
    lim = StoichLimits(**truth.TRUE_LIMITS)
    tn, tp = stoich_from_soc(lim, soc)
    assert soc_from_stoich(lim, theta_n=tn) == pytest.approx(soc, abs=1e-12)
    assert soc_from_stoich(lim, theta_p=tp) == pytest.approx(soc, abs=1e-12)


@pytest.mark.parametrize("theta", [0.05, 0.3, 0.5, 0.93])
@pytest.mark.parametrize("flux", [-3e-5, -1e-7, 0.0, 2e-6, 4e-5])
def test_overpotential_matches_high_precision_reference(cell, theta, flux):
    mpmath.mp.dps = 40
    for electrode in (ANODE, CATHODE):
        cmax = cell.c_smax(electrode)
        c = theta * cmax
        i0 = mpmath.mpf(cell.k(electrode)) * mpmath.sqrt(mpmath.mpf(cell.c_e_avg) * (cmax - c) * c)
        ref = 2 * mpmath.mpf(GAS_CONSTANT) * cell.temperature / FARADAY * mpmath.asinh(
            FARADAY * mpmath.mpf(flux) / (2 * i0))
        got = overpotential(cell, electrode, c, flux)
        assert abs(float(got) - float(ref)) <= 1e-13 + 1e-12 * abs(float(ref))


@settings(max_examples=60, deadline=None)
@given(theta=st.floats(1e-4, 1 - 1e-4), flux=st.floats(-1e-3, 1e-3))
def test_overpotential_inverts_butler_volmer(theta, flux):
    cell = truth.true_cell(planted=False)
    c = theta * cell.c_smax_n
    eta = overpotential(cell, ANODE, c, flux)
    i0 = exchange_current(cell, ANODE, c)
    back = 2 * i0 * np.sinh(FARADAY * eta / (2 * GAS_CONSTANT * cell.temperature)) / FARADAY
    assert back == pytest.approx(flux, rel=1e-9, abs=1e-18)
    assert np.sign(eta) == np.sign(flux)


@pytest.mark.parametrize("c", [0.0, -1.0, truth.C_SMAX_N, 1.2 * truth.C_SMAX_N])
def test_overpotential_saturation(cell, c):
    with pytest.raises(SaturationError) as info:
        overpotential(cell, ANODE, c, 1e-6, time=12.0)
    assert info.value.electrode == ANODE


def test_flux_signs_on_discharge(cell):
    gn, gp = flux_gains(cell)
    assert gn > 0 > gp
    jn, jp = molar_flux(cell, 3.2)
    # anode loses and cathode gains exactly the charge carried by the current
    area_n = 3 * cell.v_n / cell.r_sn
    area_p = 3 * cell.v_p / cell.r_sp
    assert jn * area_n * FARADAY == pytest.approx(3.2, rel=1e-12)
    assert jp * area_p * FARADAY == pytest.approx(-3.2, rel=1e-12)


@pytest.mark.parametrize("soc", [0.0, 0.2, 0.55, 1.0])
def test_relaxed_voltage_is_ocv(cell, soc):
    st0 = initial_state(cell, soc)
    assert terminal_voltage(cell, st0, 0.0) == pytest.approx(float(cell.ocv(soc)), abs=1e-12)
    res = simulate(cell, soc, CurrentProfile(1.0, np.zeros(5)))
    assert np.allclose(res.voltage, cell.ocv(soc), atol=1e-12, rtol=0)


def test_simulate_agrees_with_stepping(cell):
    prof = CurrentProfile(2.0, np.concatenate([np.full(30, 3.2), np.zeros(20), np.full(15, -1.6)]))
    res = simulate(cell, 0.7, prof)
    state = initial_state(cell, 0.7)
    volts = []
    for i in prof.samples:
        volts.append(terminal_voltage(cell, state, i))
        state = step(cell, state, i, prof.dt)
    assert np.allclose(res.voltage, volts, atol=1e-11, rtol=0)
    assert np.allclose(res.final_state.conc_n[1:], state.conc_n[1:], rtol=1e-12)
    assert res.final_state.soc == pytest.approx(state.soc, abs=1e-14)


def test_simulate_matches_rk4_reference(cell):
    # Semi-discrete ODE integrated with RK4 at 0.01 s; output map applied after.
    prof = CurrentProfile(1.0, np.concatenate([np.full(40, 6.4), np.zeros(40), np.full(20, 3.2)]))
    soc0 = 0.8
    res = simulate(cell, soc0, prof)
    st0 = initial_state(cell, soc0)
    gn, gp = flux_gains(cell)
    ops = (cell.operator(ANODE), cell.operator(CATHODE))
    m = ops[0].n_states

    def rhs(y, i):
        return np.concatenate([ops[0].a_mat @ y[:m] + ops[0].b_vec * gn * i,
                               ops[1].a_mat @ y[m:] + ops[1].b_vec * gp * i])

    sub = 100
    traj = rk4(rhs, np.concatenate([st0.conc_n[1:], st0.conc_p[1:]]), 0.01, len(prof) * sub,
               np.repeat(prof.samples, sub))[::sub][:-1]
    i = prof.samples
    c_n = ops[0].surface(traj[:, :m], gn * i)
    c_p = ops[1].surface(traj[:, m:], gp * i)
    u = cell.cathode(c_p / cell.c_smax_p) - cell.anode(c_n / cell.c_smax_n)
    eta = overpotential(cell, CATHODE, c_p, gp * i) - overpotential(cell, ANODE, c_n, gn * i)
    ref = u + eta - cell.r_f * i
    assert np.max(np.abs(res.voltage - ref)) < 1e-7


def test_kinetic_scaling_degeneracy(cell):
    # (r, D, k) -> (s r, s^2 D, s k) per electrode leaves the voltage unchanged.
    prof = truth_profile = CurrentProfile(1.0, np.r_[np.full(300, 4.8), np.zeros(100), np.full(200, 1.6)])
    base = simulate(cell, 0.9, truth_profile).voltage
    for s in (0.5, 3.0):
        scaled = replace(cell, r_sn=s * cell.r_sn, d_sn=s * s * cell.d_sn, k_n=s * cell.k_n)
        assert np.max(np.abs(simulate(scaled, 0.9, prof).voltage - base)) < 1e-9
        scaled = replace(cell, r_sp=s * cell.r_sp, d_sp=s * s * cell.d_sp, k_p=s * cell.k_p)
        assert np.max(np.abs(simulate(scaled, 0.9, prof).voltage - base)) < 1e-9


def test_full_discharge_stays_in_range(cell):
    res = simulate(cell, 1.0, gen_constant(1.0, cell.q_nom))
    assert not res.saturated
    assert np.all(np.diff(res.soc) < 0)
    assert 1.5 < res.voltage.min() < res.voltage.max() < 3.7


def test_saturation_raises_with_location(cell):
    prof = _pulse(3.2, 1800)
    with pytest.raises(SaturationError) as info:
        simulate(cell, 0.3, prof)
    err = info.value
    assert err.electrode in (ANODE, CATHODE)
    assert err.index is not None and err.time == pytest.approx(err.index * prof.dt)


def test_clip_mode_flags_and_continues(cell):
    prof = _pulse(3.2, 1800)
    res = simulate(cell, 0.3, prof, on_saturation="clip")
    assert res.saturated
    k = int(np.argmax(res.flags == CLIPPED))
    assert np.all(res.violation[:k] == 0) and res.violation[k:].max() > 0
    assert np.all(np.isfinite(res.voltage[:k]))


def test_volume_average_tracks_charge(cell):
    res = simulate(cell, 1.0, gen_constant(1.0, cell.q_nom, soc_span=0.5))
    q = 0.5 * cell.q_nom * 3600.0 / FARADAY
    start = initial_state(cell, 1.0)
    dn = relaxed_volume_average(cell, ANODE, res.final_state.conc_n) - start.conc_n[0]
    dp = relaxed_volume_average(cell, CATHODE, res.final_state.conc_p) - start.conc_p[0]
    assert -dn * cell.v_n == pytest.approx(q, rel=1e-3)
    assert dp * cell.v_p == pytest.approx(q, rel=1e-3)


def test_invalid_parameters_rejected(cell):
    with pytest.raises(InvalidArgumentError):
        replace(cell, d_sn=-1.0)
    with pytest.raises(InvalidArgumentError):
        replace(cell, r_f=-0.1)
    with pytest.raises(InvalidArgumentError):
        replace(cell, anode=cell.cathode, cathode=cell.anode)
    with pytest.raises(InvalidArgumentError):
        simulate(cell, 1.2, _pulse(0.0, 3))
    with pytest.raises(InvalidArgumentError):
        simulate(cell, 0.5, _pulse(0.0, 3), on_saturation="ignore")
