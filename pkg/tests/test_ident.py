import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cellid import truth
from cellid.cli import truth_ecm
from cellid.config import default_config
from cellid.errors import InsufficientDataError, InvalidArgumentError, ProtocolMismatchError, SaturationError
from cellid.ident import (band, build_kinetics_problem, ecm_static_characterize, extract_ocv_points,
                          fit_corrections, fit_exponential, predict_ocv, rmse, validate)
from cellid.protocols import CurrentProfile, Dataset, gen_constant, gen_ident_noise, gen_pdt, synthesize_dataset
from cellid.spm import StoichLimits

Q = truth.Q_NOM_AH


@pytest.fixture(scope="module")
def cell():
    return truth.true_cell()


@pytest.fixture(scope="module")
def pdt(cell):
    return synthesize_dataset(cell, gen_pdt(Q), 1.0)


def test_rmse_and_bands():
    assert rmse([1.0, 2.0], [1.0, 2.0]) == 0.0
    assert rmse([0.0, 0.0], [3.0, 4.0]) == pytest.approx(np.sqrt(12.5))
    with pytest.raises(InvalidArgumentError):
        rmse([1.0], [1.0, 2.0])
    assert band(0.0199) == "good"
    assert band(0.020) == "acceptable"
    assert band(0.0499) == "acceptable"
    assert band(0.050) == "poor"
    assert band(0.100) == "out-of-band"
    assert band(None) == "failed" and band(float("nan")) == "failed"


def test_ocv_points_from_truth_rests(cell, pdt):
    pts = extract_ocv_points(pdt, Q)
    assert len(pts) == 20
    assert np.allclose(pts.soc, np.linspace(0.95, 0.0, 20), atol=1e-9)
    # 1800 s rests relax the truth to within 0.1 mV of its OCV
    assert np.max(np.abs(pts.ocv - cell.ocv(pts.soc))) < 1e-4
    assert np.all(np.abs(pts.rest_quality) < 1e-7)


def test_ocv_points_need_rests(cell):
    ds = synthesize_dataset(cell, gen_constant(1.0, Q, soc_span=0.2), 1.0)
    with pytest.raises(ProtocolMismatchError):
        extract_ocv_points(ds, Q)


def test_corrections_recover_planted_terms(pdt):
    pts = extract_ocv_points(pdt, Q)
    an, ca = truth.literature_curves()
    lim = StoichLimits(**truth.TRUE_LIMITS)
    resid = pts.ocv - predict_ocv(an, ca, lim.as_array(), pts.soc)
    fit = fit_corrections(pts.soc, resid, lim)
    g = fit.anode.gauss_params[0]
    assert g == pytest.approx([truth.BUMP_AMPLITUDE_V, truth.BUMP_CENTER_SOC, truth.BUMP_WIDTH_SOC],
                              rel=1e-3)
    e = fit.cathode.exp_params
    assert e[1] == pytest.approx(truth.TAIL_RATE, rel=1e-3)
    assert e[0] * np.exp(e[1]) == pytest.approx(truth.TAIL_AT_FULL_V, rel=1e-2)
    assert max(fit.zone_rmse_after) < 1e-5 < min(fit.zone_rmse_before)


def test_corrections_skip_clean_residual():
    soc = np.linspace(0, 1, 21)
    lim = StoichLimits(**truth.TRUE_LIMITS)
    with pytest.warns(RuntimeWarning):
        fit = fit_corrections(soc, np.zeros_like(soc), lim)
    assert fit.anode is None and fit.cathode is None


@settings(max_examples=15, deadline=None)
@given(base=st.floats(0.01, 0.1), amp=st.floats(0.002, 0.05), rate=st.floats(1.0, 15.0),
       sign=st.sampled_from([-1.0, 1.0]))
def test_fit_exponential_recovers_noiseless(base, amp, rate, sign):
    # rate = 0 makes base and amp indistinguishable, so stay away from it
    rate *= sign
    soc = np.linspace(0.0, 1.0, 40)
    got = fit_exponential(soc, base + amp * np.exp(rate * soc))
    assert got == pytest.approx((base, amp, rate), rel=1e-5, abs=1e-8)


def test_ecm_static_recovers_truth_r0():
    cfg = default_config()
    ecm = truth_ecm(cfg)
    ds = synthesize_dataset(ecm, gen_pdt(Q), 1.0)
    static = ecm_static_characterize(ds, Q)
    grid = np.linspace(0.0, 1.0, 11)
    assert np.max(np.abs(static.r0(grid) / ecm.r0(grid) - 1)) < 0.01
    assert static.edge_soc.size == 40
    # rest-end points land on the truth OCV within the residual RC relaxation
    assert np.max(np.abs(static.ocv_map(static.ocv_map.soc) - ecm.ocv_map(static.ocv_map.soc))) < 1e-3


def test_ecm_static_needs_edges(cell):
    ds = synthesize_dataset(cell, gen_constant(1.0, Q, soc_span=0.2), 1.0)
    with pytest.raises(InsufficientDataError):
        ecm_static_characterize(ds, Q)


def test_kinetics_residual_vanishes_at_truth(cell):
    ds = [synthesize_dataset(cell, gen_constant(1.0, Q, soc_span=0.3), 1.0),
          synthesize_dataset(cell, gen_ident_noise(Q), 0.95)]
    problem, _ = build_kinetics_problem(ds, cell)
    assert np.max(np.abs(problem.residual_fn(problem.x0))) < 1e-12
    assert problem.trajectory_penalty_fn(problem.x0) == 0.0


def test_validate_records_failures(cell):
    good = synthesize_dataset(cell, gen_constant(0.5, Q, soc_span=0.2), 0.9)
    # starts almost empty: the truth saturates long before the end
    bad = Dataset(CurrentProfile(1.0, np.full(1800, 2 * Q)), np.full(1800, 3.0), 0.3)
    report, preds = validate({"spm": cell}, {"ok": good, "bad": bad})
    assert report.rmse("spm", "ok") == 0.0
    assert report.get("spm", "bad").band == "failed"
    assert "saturat" in report.get("spm", "bad").error.lower()
    assert preds[("spm", "bad")] is None
    assert report.failed
    assert "FAILED" in report.format_table()


def test_saturation_error_type_is_recorded(cell):
    with pytest.raises(SaturationError):
        synthesize_dataset(cell, CurrentProfile(1.0, np.full(1800, 2 * Q)), 0.3)
