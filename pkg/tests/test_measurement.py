import cmath
import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dcesim.errors import ConfigMismatch, FactorizationFailure, NegativeDenominator, RecordTooShort
from dcesim.gaussian import (
    I_MINUS, I_PLUS, Q_MINUS, Q_PLUS, TwoModeState, covariance_matrix, rotate_phase, sigma2_quadrature,
)
from dcesim.measurement import (
    AmplifierModel,
    DigitizerConfig,
    VoltageRecord,
    analyze_record,
    antialias_taps,
    chopped_power_difference,
    correlation_length,
    cross_correlations,
    estimate_psi,
    estimate_rotated_psi,
    estimate_sigma1,
    estimate_sigma2,
    filter_autocorrelation,
    filter_gain,
    mean_power,
    sample_record,
)

TWO_PI = 2 * math.pi
CENTER = TWO_PI * 5.65e9
WP, WM = CENTER + TWO_PI * 20e6, CENTER - TWO_PI * 20e6
N = 1_000_000
QUIET = AmplifierModel(0.0)
WARM = AmplifierModel(6.0)


def squeezed(r, phase=0.0):
    return covariance_matrix(TwoModeState.squeezed_vacuum(r, phase, WP, WM))


def vacuum():
    return covariance_matrix(TwoModeState.vacuum(WP, WM))


def record(cov, amp=QUIET, seed=1, n=N, **kw):
    cfg = DigitizerConfig(samples_per_channel=n, rng_seed=seed, **kw)
    return sample_record(cov, amp, cfg, CENTER)


@pytest.fixture(scope="module")
def vac_rec():
    return record(vacuum(), seed=10)


@pytest.fixture(scope="module")
def tms_rec():
    return record(squeezed(0.05), seed=11)


# --- amplifier and filter ---------------------------------------------------

def test_added_quanta():
    # literal CODATA values, independent of the package's constant table
    assert WARM.added_quanta(CENTER) == pytest.approx(22.127383153, rel=1e-9)
    assert QUIET.added_quanta(CENTER) == 0
    with pytest.raises(ValueError):
        AmplifierModel(-1.0)


def test_hann_filter_gain_closed_form():
    # sum sin^4 over a full period of 32 points is 3*32/8 = 12, sum sin^2 is 16
    assert filter_gain(antialias_taps(31)) == pytest.approx(12 / 256, rel=1e-14)
    assert antialias_taps(31).sum() == pytest.approx(1, rel=1e-14)
    assert filter_gain(antialias_taps(1)) == 1
    assert correlation_length(np.ones(1)) == 1


def test_correlation_length_matches_direct_loop():
    h = antialias_taps(31)
    acf = [sum(h[m] * h[m + k] for m in range(len(h) - k)) for k in range(len(h))]
    direct = 1 + 2 * sum((a / acf[0]) ** 2 for a in acf[1:])
    assert correlation_length(h) == pytest.approx(direct, rel=1e-12)
    np.testing.assert_allclose(filter_autocorrelation(h), acf, rtol=1e-12, atol=1e-18)


def test_digitizer_validation():
    with pytest.raises(ValueError):
        DigitizerConfig(samples_per_channel=100, max_lag=20)
    with pytest.raises(ValueError):
        DigitizerConfig(antialias_taps=30)
    with pytest.raises(ValueError):
        DigitizerConfig(analysis_bandwidth=0)
    with pytest.raises(ValueError):
        DigitizerConfig(rng_seed=-1)


# --- sampling ---------------------------------------------------------------

def test_vacuum_channel_variance(vac_rec):
    g = vac_rec.filter_gain
    for c in range(4):
        sq = vac_rec.channels[c] ** 2
        se = np.std(sq) / math.sqrt(vac_rec.n_eff)
        assert abs(sq.mean() - 0.5 * g) < 5 * se


def test_record_determinism_and_worker_independence():
    cov = squeezed(0.1)
    cfg = DigitizerConfig(samples_per_channel=200_003, rng_seed=7, chunk_size=4096)
    a = sample_record(cov, WARM, cfg, CENTER)
    b = sample_record(cov, WARM, cfg, CENTER)
    c = sample_record(cov, WARM, cfg, CENTER, workers=3)
    assert a == b == c
    assert np.array_equal(a.channels, c.channels)
    other = sample_record(cov, WARM, replace(cfg, rng_seed=8), CENTER)
    assert not np.array_equal(a.channels, other.channels)


def test_chunk_size_does_not_change_record():
    cov = squeezed(0.1)
    a = sample_record(cov, QUIET, DigitizerConfig(samples_per_channel=50_000, rng_seed=3, chunk_size=1 << 18), CENTER)
    b = sample_record(cov, QUIET, DigitizerConfig(samples_per_channel=50_000, rng_seed=3, chunk_size=1 << 18), CENTER, workers=2)
    assert np.array_equal(a.channels, b.channels)


def test_factorization_failure():
    bad = np.eye(4) * 0.5
    bad[0, 2] = bad[2, 0] = 2.0
    with pytest.raises(FactorizationFailure):
        sample_record(bad, QUIET, DigitizerConfig(samples_per_channel=1000), CENTER)


def test_record_validation():
    with pytest.raises(ValueError):
        VoltageRecord(np.zeros((3, 10)))
    x = np.zeros((4, 10))
    x[0, 0] = np.nan
    with pytest.raises(ValueError):
        VoltageRecord(x)


# --- estimators on vacuum ---------------------------------------------------

def test_vacuum_estimates_null(vac_rec):
    s2 = estimate_sigma2(vac_rec)
    assert abs(s2.value) < 4 * s2.se
    for side in ("plus", "minus"):
        s1 = estimate_sigma1(vac_rec, side)
        assert abs(s1.value) < 4 * s1.se
    psi = estimate_psi(vac_rec)
    assert abs(psi.value.real) < 4 * psi.se_real and abs(psi.value.imag) < 4 * psi.se_imag
    lagged = cross_correlations(vac_rec, 20)
    zero = lagged.lags.tolist().index(0)
    for name in lagged.values:
        assert abs(lagged.values[name][zero]) < 4 * lagged.se[name][zero]


def test_amplifier_only_null():
    rec = record(vacuum(), WARM, seed=12)
    lagged = cross_correlations(rec, 5)
    zero = lagged.lags.tolist().index(0)
    for name in lagged.values:
        assert abs(lagged.values[name][zero]) < 4 * lagged.se[name][zero]


# --- estimators on a squeezed pair -------------------------------------------

def test_zero_lag_correlations_track_source(tms_rec):
    psi = TwoModeState.squeezed_vacuum(0.05, 0.0, WP, WM).psi_corr.real
    g = tms_rec.filter_gain
    lagged = cross_correlations(tms_rec, 20)
    zero = lagged.lags.tolist().index(0)
    assert abs(lagged.values["I+I-"][zero] - psi * g) < 4 * lagged.se["I+I-"][zero]
    assert abs(lagged.values["Q+Q-"][zero] + psi * g) < 4 * lagged.se["Q+Q-"][zero]


def test_lag_shape_is_filter_autocorrelation(tms_rec):
    psi = TwoModeState.squeezed_vacuum(0.05, 0.0, WP, WM).psi_corr.real
    lagged = cross_correlations(tms_rec, 20)
    acf = filter_autocorrelation(tms_rec.taps)
    expected = np.array([acf[abs(k)] if abs(k) < len(acf) else 0.0 for k in lagged.lags]) * psi
    dev = np.abs(lagged.values["I+I-"] - expected) / lagged.se["I+I-"]
    assert dev.max() < 5


def test_sigma2_converges_to_source(tms_rec):
    s2 = estimate_sigma2(tms_rec)
    assert abs(s2.value - math.tanh(0.1)) < 4 * s2.se
    assert sigma2_quadrature(squeezed(0.05)) == pytest.approx(math.tanh(0.1), rel=1e-12)


def test_sigma1_of_pipeline_record(tms_rec):
    for side in ("plus", "minus"):
        s1 = estimate_sigma1(tms_rec, side)
        assert abs(s1.value) < 4 * s1.se
    with pytest.raises(ValueError):
        estimate_sigma1(tms_rec, "left")


def test_sigma1_hand_built_record():
    rng = np.random.default_rng(5)
    x = rng.standard_normal((4, N)) * math.sqrt(0.5)
    x[0] *= math.sqrt(2)
    s1 = estimate_sigma1(VoltageRecord(x), "plus")
    assert abs(s1.value - 1 / 3) < 4 * s1.se


def test_psi_estimate(tms_rec):
    psi = TwoModeState.squeezed_vacuum(0.05, 0.0, WP, WM).psi_corr.real
    est = estimate_psi(tms_rec)
    assert abs(est.value.real - 2 * psi * tms_rec.filter_gain) < 4 * est.se_real
    assert abs(est.value.imag) < 4 * est.se_imag


def test_correlation_symmetry(tms_rec):
    ch = tms_rec.channels
    s = ch[I_PLUS] * ch[I_MINUS] + ch[Q_PLUS] * ch[Q_MINUS]
    d = ch[I_PLUS] * ch[Q_MINUS] - ch[I_MINUS] * ch[Q_PLUS]
    for series in (s, d):
        se = np.std(series) / math.sqrt(tms_rec.n_eff)
        assert abs(series.mean()) < 4 * se


def test_rotation_commutes_with_estimation():
    state = TwoModeState.squeezed_vacuum(0.1, 0.0, WP, WM)
    base = record(covariance_matrix(state), seed=21)
    for theta in (0.3, 1.0, 2.2):
        digital = estimate_psi(base.rotated(theta), normalize=True)
        physical = estimate_psi(record(covariance_matrix(rotate_phase(state, theta)), seed=22), normalize=True)
        diff = digital.value - physical.value
        assert abs(diff.real) < 4 * math.hypot(digital.se_real, physical.se_real)
        assert abs(diff.imag) < 4 * math.hypot(digital.se_imag, physical.se_imag)
        assert abs(digital.value - cmath.exp(-2j * theta) * estimate_psi(base, normalize=True).value) < 1e-12


def test_rotated_psi_scan_matches_rotation(tms_rec):
    thetas = np.linspace(0, math.pi, 5)
    values, ses = estimate_rotated_psi(tms_rec, thetas)
    for t, v in zip(thetas, values):
        assert v == pytest.approx(estimate_psi(tms_rec.rotated(t), normalize=True).value.real, abs=1e-12)
    assert np.all(ses > 0)


# --- amplifier dilution -----------------------------------------------------

def test_dilution_and_recovery():
    r = 0.1
    n = math.sinh(r) ** 2
    cov = squeezed(r)
    rec = record(cov, WARM, seed=31)
    n_amp = WARM.added_quanta(CENTER)
    raw = estimate_sigma2(rec)
    expected = math.tanh(2 * r) * (0.5 + n) / (0.5 + n + n_amp)
    assert abs(raw.value - expected) < 4 * raw.se
    sub = estimate_sigma2(rec, WARM, subtract_amplifier=True)
    assert abs(sub.value - math.tanh(2 * r)) < 4 * sub.se
    with pytest.raises(ValueError):
        estimate_sigma2(rec, subtract_amplifier=True)


def test_negative_denominator():
    rec = record(vacuum(), QUIET, seed=32, n=10_000)
    with pytest.raises(NegativeDenominator):
        estimate_sigma2(rec, WARM, subtract_amplifier=True)


# --- chopped power ----------------------------------------------------------

def test_chopped_power_null():
    a = record(squeezed(0.1), seed=41)
    b = record(squeezed(0.1), seed=42)
    d = chopped_power_difference(a, b)
    assert abs(d.value) < 4 * d.se


def test_chopped_power_tracks_occupation():
    r = 0.2
    on = record(squeezed(r), seed=43)
    off = record(vacuum(), seed=44)
    d = chopped_power_difference(on, off)
    expected = 2 * math.sinh(r) ** 2 * on.filter_gain
    assert abs(d.value - expected) < 4 * d.se


def test_chopped_power_amplifier_cancels():
    r = 0.2
    cold = chopped_power_difference(record(squeezed(r), seed=45), record(vacuum(), seed=46))
    warm = chopped_power_difference(record(squeezed(r), WARM, seed=45), record(vacuum(), WARM, seed=46))
    expected = 2 * math.sinh(r) ** 2 * filter_gain(antialias_taps(31))
    assert abs(warm.value - expected) < 4 * warm.se
    assert warm.se / cold.se == pytest.approx((0.5 + 22.127) / 0.5, rel=0.2)


def test_chopped_power_mismatch():
    a = record(vacuum(), seed=1, n=1000)
    with pytest.raises(ConfigMismatch):
        chopped_power_difference(a, record(vacuum(), seed=1, n=2000))
    with pytest.raises(ConfigMismatch):
        chopped_power_difference(a, record(vacuum(), seed=1, n=1000, analysis_bandwidth=5e6))


def test_record_too_short():
    rec = VoltageRecord(np.zeros((4, 1)))
    with pytest.raises(RecordTooShort):
        estimate_sigma2(rec)
    with pytest.raises(RecordTooShort):
        cross_correlations(VoltageRecord(np.ones((4, 50))), 20)


# --- gain invariance ---------------------------------------------------------

@pytest.fixture(scope="module")
def small_rec():
    return record(squeezed(0.1, 0.4), WARM, seed=51, n=20_000)


@settings(max_examples=40, deadline=None)
@given(gain=st.floats(1e-3, 1e3))
def test_gain_invariance(small_rec, gain):
    scaled = small_rec.scaled(gain)
    assert estimate_sigma2(scaled).value == pytest.approx(estimate_sigma2(small_rec).value, rel=1e-12, abs=1e-15)
    for side in ("plus", "minus"):
        assert estimate_sigma1(scaled, side).value == pytest.approx(
            estimate_sigma1(small_rec, side).value, rel=1e-12, abs=1e-15)
    a = estimate_psi(scaled, normalize=True).value
    b = estimate_psi(small_rec, normalize=True).value
    assert abs(a - b) <= 1e-12 * max(abs(b), 1e-3)


# --- bundled result -----------------------------------------------------------

def test_analyze_record_export(small_rec):
    res = analyze_record(small_rec, WARM, max_lag=5)
    d = res.to_dict()
    assert d["version"] == 1 and d["units"]["sigma"] == "dimensionless"
    assert len(d["lags"]) == 11
    assert set(d["correlations"]) == {"I+I-", "Q+Q-", "I+Q-", "I-Q+"}
    for key in ("sigma2", "sigma2_amplifier_subtracted", "sigma1_plus", "sigma1_minus"):
        assert d[key]["se"] > 0
    assert d["p_avg"] == pytest.approx(mean_power(small_rec).value)
    assert res.p_avg_subtracted < res.p_avg
    import json
    assert json.loads(res.to_json())["n_samples"] == 20_000


def test_analyze_record_skips_unphysical_subtraction():
    rec = record(vacuum(), QUIET, seed=32, n=10_000)
    res = analyze_record(rec, WARM)
    assert res.sigma2_subtracted is None and res.p_avg_subtracted < 0
    assert res.to_dict()["sigma2_amplifier_subtracted"] is None
