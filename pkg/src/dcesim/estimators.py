"""scikit-learn style wrappers around the record estimators.

Records enter as ``VoltageRecord`` objects or as (n_samples, 4) arrays with
columns (I+, Q+, I-, Q-), so the estimators drop into sklearn pipelines.
"""

import math

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .measurement import (
    VoltageRecord,
    analyze_record,
)


def check_record(X, taps=None, center_freq=None) -> VoltageRecord:
    """Coerce ``X`` to a validated ``VoltageRecord``.

    Arrays must be (n_samples, 4) and finite. ``taps`` defaults to a single
    unit tap (white samples) when the array carries no filter information.
    """
    if isinstance(X, VoltageRecord):
        return X
    X = check_array(X, dtype=np.float64, ensure_min_samples=2)
    if X.shape[1] != 4:
        raise ValueError(f"expected 4 quadrature columns (I+, Q+, I-, Q-), got {X.shape[1]}")
    return VoltageRecord.from_samples(
        X, taps=np.ones(1) if taps is None else taps, center_freq=center_freq
    )


class SqueezingEstimator(BaseEstimator):
    """Estimate sigma2, sigma1 and Psi from a quadrature record.

    Parameters
    ----------
    amplifier : AmplifierModel, optional
        Needed for the amplifier-subtracted normalization.
    max_lag : int
        Half-width of the lag window for the cross-correlation functions.
    taps, center_freq
        Filter taps and center frequency (rad/s) to assume for plain arrays.
    """

    def __init__(self, amplifier=None, max_lag=0, taps=None, center_freq=None):
        self.amplifier = amplifier
        self.max_lag = max_lag
        self.taps = taps
        self.center_freq = center_freq

    def fit(self, X, y=None):
        rec = check_record(X, self.taps, self.center_freq)
        res = analyze_record(rec, self.amplifier, self.max_lag)
        self.result_ = res
        self.n_features_in_ = 4
        self.n_samples_ = res.n_samples
        self.sigma2_, self.sigma2_se_ = res.sigma2
        if res.sigma2_subtracted is not None:
            self.sigma2_subtracted_, self.sigma2_subtracted_se_ = res.sigma2_subtracted
        self.sigma1_plus_, self.sigma1_plus_se_ = res.sigma1_plus
        self.sigma1_minus_, self.sigma1_minus_se_ = res.sigma1_minus
        self.psi_ = res.psi_normalized.value
        self.psi_se_ = complex(res.psi_normalized.se_real, res.psi_normalized.se_imag)
        self.p_avg_ = res.p_avg
        return self

    def score(self, X, y=None):
        """Signal-to-noise of sigma2 on ``X`` (sigma2 / SE)."""
        check_is_fitted(self)
        fitted = SqueezingEstimator(**self.get_params()).fit(X)
        return fitted.sigma2_ / fitted.sigma2_se_


class PhaseRotator(TransformerMixin, BaseEstimator):
    """Digital phase rotation of both sidebands by ``theta`` (a -> a e^{-i theta})."""

    def __init__(self, theta=0.0):
        self.theta = theta

    def fit(self, X, y=None):
        check_record(X)
        self.n_features_in_ = 4
        return self

    def transform(self, X):
        check_is_fitted(self, "n_features_in_")
        if isinstance(X, VoltageRecord):
            return X.rotated(self.theta)
        X = check_array(X, dtype=np.float64)
        c, s = math.cos(self.theta), math.sin(self.theta)
        out = np.empty_like(X)
        out[:, 0] = c * X[:, 0] + s * X[:, 1]
        out[:, 1] = c * X[:, 1] - s * X[:, 0]
        out[:, 2] = c * X[:, 2] + s * X[:, 3]
        out[:, 3] = c * X[:, 3] - s * X[:, 2]
        return out
