import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cellid import truth
from cellid.errors import InvalidArgumentError, SaturationError, SizeError
from cellid.ident.ocv import find_rests
from cellid.protocols import (IDENT_WN_SPEC, VALIDATION_SPECS, CurrentProfile, NoiseSpec, gen_constant,
                              gen_ident_noise, gen_noise_discharge, gen_pdt, gen_validation,
                              synthesize_dataset)
from cellid.spm import simulate

Q = truth.Q_NOM_AH


def _pulses(profile):
    on = profile.samples > 0
    return int(np.sum(on[1:] & ~on[:-1]) + on[0])


def test_pdt_defaults():
    p = gen_pdt(Q)
    assert _pulses(p) == 20
    # 5 % of capacity per pulse at 1C is 180 s
    on = np.flatnonzero(p.samples > 0)
    assert np.sum(p.samples > 0) == 20 * 180
    assert p.samples[on[0]] == pytest.approx(Q)
    assert p.charge_ah == pytest.approx(Q, abs=Q * p.dt / 3600.0)
    assert p.max_c_rate == pytest.approx(1.0)


def test_pdt_single_pulse():
    p = gen_pdt(Q, pulse_soc_step=1.0)
    assert _pulses(p) == 1
    rests = find_rests(p.samples, p.dt, 600)
    assert len(rests) == 1 and rests[0][1] == len(p)
    assert p.charge_ah == pytest.approx(Q)


@settings(max_examples=25, deadline=None)
@given(step=st.floats(0.01, 1.0), c=st.floats(0.2, 3.0))
def test_pdt_charge_bookkeeping(step, c):
    p = gen_pdt(Q, pulse_c_rate=c, pulse_soc_step=step, rest_duration=600)
    assert abs(p.charge_ah - Q) <= c * Q * p.dt / 3600.0 + 1e-9
    assert _pulses(p) == int(np.ceil(1.0 / step - 1e-9))


def test_pdt_preconditions():
    with pytest.raises(InvalidArgumentError):
        gen_pdt(Q, rest_duration=300)
    with pytest.raises(InvalidArgumentError):
        gen_pdt(Q, pulse_soc_step=0.0)
    with pytest.raises(SizeError):
        gen_pdt(Q, dt=1e-4)


def test_constant_durations():
    assert gen_constant(1.0, Q).duration == pytest.approx(3600.0)
    assert gen_constant(2.0, Q).duration == pytest.approx(1800.0)
    assert gen_constant(1.0, Q, soc_span=0.5).duration == pytest.approx(1800.0)
    assert np.all(gen_constant(1.0, Q).samples == Q)


def test_noise_profile_reproducible_and_bounded():
    a = gen_noise_discharge(5, 1.5, 3.0, q_nom=Q, duration=1440)
    b = gen_noise_discharge(5, 1.5, 3.0, q_nom=Q, duration=1440)
    c = gen_noise_discharge(6, 1.5, 3.0, q_nom=Q, duration=1440)
    assert np.array_equal(a.samples, b.samples)
    assert not np.array_equal(a.samples, c.samples)
    assert np.max(np.abs(a.samples)) <= 3.0 * Q


def test_zero_variance_noise_is_constant():
    p = gen_noise_discharge(1, 0.8, 2.0, q_nom=Q, std_c_rate=0.0)
    assert np.all(p.samples == 0.8 * Q)


def test_noise_mean_and_spread():
    p = gen_noise_discharge(3, 1.0, 5.0, q_nom=1.0, duration=200_000, std_c_rate=0.5)
    assert np.mean(p.samples) == pytest.approx(1.0, abs=0.02)
    assert np.std(p.samples) == pytest.approx(0.5, rel=0.05)


@pytest.mark.parametrize("test_id", sorted(VALIDATION_SPECS))
def test_validation_profiles_respect_band(test_id):
    p = gen_validation(test_id, Q)
    peak = VALIDATION_SPECS[test_id][2]
    assert p.band == peak
    assert np.max(np.abs(p.samples)) <= peak * Q
    assert p.label == test_id


def test_band_is_enforced():
    with pytest.raises(InvalidArgumentError):
        CurrentProfile(1.0, np.array([0.0, 7.0]), c_rate_base=3.2, band=2.0)


def test_synthesize_clean_is_bit_identical():
    cell = truth.true_cell()
    prof = gen_ident_noise(Q)
    clean = simulate(cell, 0.95, prof).voltage
    ds = synthesize_dataset(cell, prof, 0.95, NoiseSpec(), seed=3)
    assert np.array_equal(ds.voltage, clean)
    assert ds.provenance == "synthetic(truth)"


def test_synthesize_noise_statistics_and_seeds():
    cell = truth.true_cell()
    prof = gen_constant(0.5, Q, soc_span=0.9)  # 6480 samples
    prof2 = gen_ident_noise(Q)
    for p in (prof, prof2):
        clean = simulate(cell, 0.95, p).voltage
        a = synthesize_dataset(cell, p, 0.95, NoiseSpec(sigma_v=0.005), seed=1)
        b = synthesize_dataset(cell, p, 0.95, NoiseSpec(sigma_v=0.005), seed=2)
        assert not np.array_equal(a.voltage, b.voltage)
    n = len(prof) + len(prof2)
    assert n >= 1e4
    d1 = synthesize_dataset(cell, prof, 0.95, NoiseSpec(sigma_v=0.005), seed=1)
    d2 = synthesize_dataset(cell, prof2, 0.95, NoiseSpec(sigma_v=0.005), seed=1)
    resid = np.concatenate([d1.voltage - simulate(cell, 0.95, prof).voltage,
                            d2.voltage - simulate(cell, 0.95, prof2).voltage])
    assert np.sqrt(np.mean(resid**2)) == pytest.approx(0.005, rel=0.1)


def test_current_noise_replaces_profile():
    cell = truth.true_cell()
    prof = gen_constant(1.0, Q, soc_span=0.1)
    ds = synthesize_dataset(cell, prof, 0.9, NoiseSpec(sigma_i=0.01), seed=0)
    assert ds.profile.band is None
    assert np.std(ds.current - prof.samples) == pytest.approx(0.01, rel=0.2)


def test_synthesize_propagates_saturation():
    with pytest.raises(SaturationError):
        synthesize_dataset(truth.true_cell(), gen_constant(3.0, Q), 0.5)


def test_pdt_rest_tails_are_flat():
    cell = truth.true_cell()
    p = gen_pdt(Q)
    v = simulate(cell, 1.0, p).voltage
    for start, stop in find_rests(p.samples, p.dt, 600):
        tail = v[stop - 60:stop]
        slope = abs(np.polyfit(np.arange(60) * p.dt, tail, 1)[0])
        assert slope <= 0.02e-3


def test_ident_wn_spec():
    p = gen_ident_noise(Q)
    assert p.duration == IDENT_WN_SPEC[3]
    assert p.max_c_rate <= IDENT_WN_SPEC[2]
