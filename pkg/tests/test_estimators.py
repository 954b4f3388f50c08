import math

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.pipeline import make_pipeline

from dcesim.estimators import PhaseRotator, SqueezingEstimator, check_record
from dcesim.gaussian import TwoModeState, covariance_matrix
from dcesim.measurement import AmplifierModel, DigitizerConfig, estimate_psi, estimate_sigma2, sample_record

CENTER = 2 * math.pi * 5.65e9


@pytest.fixture(scope="module")
def rec():
    cov = covariance_matrix(TwoModeState.squeezed_vacuum(0.1, 0.0, CENTER + 1e8, CENTER - 1e8))
    return sample_record(cov, AmplifierModel(6.0), DigitizerConfig(samples_per_channel=50_000, rng_seed=4), CENTER)


def test_fit_matches_functional_estimators(rec):
    est = SqueezingEstimator(amplifier=AmplifierModel(6.0), max_lag=5).fit(rec)
    s2 = estimate_sigma2(rec)
    assert est.sigma2_ == s2.value and est.sigma2_se_ == s2.se
    assert est.sigma2_subtracted_ > est.sigma2_
    assert est.n_samples_ == 50_000 and est.n_features_in_ == 4
    assert est.psi_ == estimate_psi(rec, normalize=True).value
    assert est.score(rec) == pytest.approx(s2.value / s2.se)


def test_array_input(rec):
    X = rec.as_samples()
    est = SqueezingEstimator(taps=rec.taps).fit(X)
    assert est.sigma2_ == pytest.approx(estimate_sigma2(rec).value, rel=1e-12)
    assert not hasattr(est, "sigma2_subtracted_")
    with pytest.raises(ValueError):
        SqueezingEstimator().fit(np.zeros((10, 3)))


def test_clone_and_params():
    est = SqueezingEstimator(max_lag=3)
    assert clone(est).get_params()["max_lag"] == 3


def test_phase_rotator_array_and_record(rec):
    rot = PhaseRotator(theta=0.4)
    X = rot.fit_transform(rec.as_samples())
    np.testing.assert_allclose(X, rec.rotated(0.4).as_samples(), rtol=0, atol=1e-15)
    assert rot.transform(rec) == rec.rotated(0.4)


def test_pipeline(rec):
    pipe = make_pipeline(PhaseRotator(theta=math.pi / 4), SqueezingEstimator(taps=rec.taps))
    pipe.fit(rec.as_samples())
    # a quarter turn of both sidebands moves Psi onto the imaginary axis
    est = pipe[-1]
    assert abs(est.psi_.real) < 4 * est.psi_se_.real
    assert est.psi_.imag < 0


def test_check_record_passthrough(rec):
    assert check_record(rec) is rec
    assert len(check_record(np.ones((5, 4)))) == 5
