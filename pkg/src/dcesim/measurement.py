"""Synthetic heterodyne records and the correlation estimators run on them.

A record holds the four quadrature voltages (I+, Q+, I-, Q-) in vacuum-1/2
units. Samples are drawn white (one independent 4-vector per inverse analysis
bandwidth) from the source covariance plus amplifier noise, then passed
through a symmetric FIR antialias filter that sets the lag-domain shape of
every correlation.

Seeding contract
----------------
Raw draws are produced in chunks of ``DigitizerConfig.chunk_size`` rows.
Chunk ``k`` of a record with seed ``s`` uses
``numpy.random.default_rng(SeedSequence(s, spawn_key=(k,)))`` and draws
``standard_normal((rows, 4))``. Records are therefore identical for any
number of workers.
"""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import NamedTuple

import numpy as np

from .constants import HBAR, K_B
from .errors import (
    ConfigMismatch,
    FactorizationFailure,
    NegativeDenominator,
    RecordTooShort,
)
from .gaussian import CHANNELS, I_MINUS, I_PLUS, Q_MINUS, Q_PLUS, QuadratureCovariance

JITTER = 1e-12
SE_SIGMAS = 4.0  # acceptance band used throughout the test-suite


@dataclass(frozen=True)
class AmplifierModel:
    """Phase-insensitive amplifier referred to its input.

    ``gain`` is bookkeeping only; every estimator is normalized and does not see it.
    """

    noise_temperature: float = 6.0
    gain: float = 1.0

    def __post_init__(self):
        if not self.noise_temperature >= 0:
            raise ValueError(f"noise_temperature must be >= 0, got {self.noise_temperature!r}")
        if not self.gain > 0:
            raise ValueError(f"gain must be positive, got {self.gain!r}")

    def added_quanta(self, center_freq) -> float:
        """Added variance per quadrature, k_B T_N / (hbar omega), in vacuum-1/2 units."""
        if self.noise_temperature == 0:
            return 0.0
        return K_B * self.noise_temperature / (HBAR * center_freq)


@dataclass(frozen=True)
class DigitizerConfig:
    analysis_bandwidth: float = 10e6  # Hz
    samples_per_channel: int = 1_000_000
    max_lag: int = 20
    antialias_taps: int = 31
    rng_seed: int = 0
    chop_period: float = 0.050  # s
    chunk_size: int = 1 << 18

    def __post_init__(self):
        if not self.analysis_bandwidth > 0:
            raise ValueError("analysis_bandwidth must be positive")
        if self.max_lag < 0:
            raise ValueError("max_lag must be >= 0")
        if self.samples_per_channel < max(10 * self.max_lag, 2):
            raise ValueError("samples_per_channel must be at least 10 * max_lag")
        if self.antialias_taps < 1 or self.antialias_taps % 2 == 0:
            raise ValueError("antialias_taps must be an odd count >= 1")
        if not 0 <= self.rng_seed < 2**64:
            raise ValueError("rng_seed must be a 64-bit unsigned integer")
        if self.chunk_size < self.antialias_taps:
            raise ValueError("chunk_size must be at least antialias_taps")
        if not self.chop_period > 0:
            raise ValueError("chop_period must be positive")

    def acquisition_key(self):
        """Settings that must match between records compared against each other."""
        d = asdict(self)
        d.pop("rng_seed")
        d.pop("chunk_size")
        return d


def antialias_taps(n_taps):
    """Raised-cosine (Hann) low-pass FIR with unit DC gain."""
    if n_taps == 1:
        return np.ones(1)
    m = np.arange(1, n_taps + 1)
    h = 0.5 * (1 - np.cos(2 * np.pi * m / (n_taps + 1)))
    return h / h.sum()


def filter_autocorrelation(taps):
    """sum_m h_m h_{m+k} for k = 0 .. len(taps) - 1."""
    taps = np.asarray(taps, dtype=float)
    full = np.correlate(taps, taps, mode="full")
    return full[len(taps) - 1:]


def filter_gain(taps) -> float:
    """Power gain sum h^2: the factor every filtered second moment picks up."""
    return float(np.sum(np.square(taps)))


def correlation_length(taps) -> float:
    """sum over all lags of the squared normalized filter autocorrelation.

    For Gaussian data the variance of any sample second moment is inflated by
    exactly this factor relative to white samples.
    """
    rho = filter_autocorrelation(taps)
    rho = rho / rho[0]
    return float(rho[0] ** 2 + 2 * np.sum(rho[1:] ** 2))


def chunk_seed(seed, chunk):
    return np.random.SeedSequence(int(seed), spawn_key=(int(chunk),))


@dataclass(frozen=True, eq=False)
class VoltageRecord:
    """Four equal-length quadrature channels plus provenance.

    ``channels`` has shape (4, n) in the order (I+, Q+, I-, Q-).
    """

    channels: np.ndarray
    taps: np.ndarray = field(default_factory=lambda: np.ones(1))
    center_freq: float | None = None  # rad/s
    seed: int | None = None
    config: DigitizerConfig | None = None
    source_id: str | None = None

    def __post_init__(self):
        ch = np.ascontiguousarray(self.channels, dtype=float)
        if ch.ndim != 2 or ch.shape[0] != 4:
            raise ValueError(f"channels must have shape (4, n), got {ch.shape}")
        if not np.all(np.isfinite(ch)):
            raise ValueError("record contains non-finite samples")
        ch.setflags(write=False)
        object.__setattr__(self, "channels", ch)
        taps = np.asarray(self.taps, dtype=float)
        taps.setflags(write=False)
        object.__setattr__(self, "taps", taps)

    def __len__(self):
        return self.channels.shape[1]

    @classmethod
    def from_samples(cls, X, **kw):
        """Build from an (n_samples, 4) array."""
        return cls(np.asarray(X, dtype=float).T, **kw)

    def as_samples(self):
        """(n_samples, 4) view of the channels."""
        return self.channels.T

    @property
    def filter_gain(self):
        return filter_gain(self.taps)

    @property
    def correlation_length(self):
        return correlation_length(self.taps)

    @property
    def n_eff(self):
        return len(self) / self.correlation_length

    def scaled(self, factor):
        return replace(self, channels=self.channels * factor)

    def rotated(self, theta):
        """Digitally rotate both sidebands by theta (a -> a e^{-i theta})."""
        c, s = math.cos(theta), math.sin(theta)
        ip, qp, im, qm = self.channels
        return replace(
            self,
            channels=np.stack([c * ip + s * qp, c * qp - s * ip, c * im + s * qm, c * qm - s * im]),
        )

    def provenance(self):
        return {
            "seed": self.seed,
            "center_freq": self.center_freq,
            "source_id": self.source_id,
            "taps": self.taps.tolist(),
            "config": None if self.config is None else asdict(self.config),
        }

    def __eq__(self, other):
        if not isinstance(other, VoltageRecord):
            return NotImplemented
        return (
            np.array_equal(self.channels, other.channels)
            and self.provenance() == other.provenance()
        )

    __hash__ = None


def covariance_id(cov) -> str:
    m = np.ascontiguousarray(getattr(cov, "matrix", cov), dtype="<f8")
    return hashlib.sha256(m.tobytes()).hexdigest()[:16]


def _factorize(matrix):
    try:
        return np.linalg.cholesky(matrix)
    except np.linalg.LinAlgError:
        pass
    try:
        return np.linalg.cholesky(matrix + JITTER * np.eye(len(matrix)))
    except np.linalg.LinAlgError as exc:
        raise FactorizationFailure("covariance plus noise is not positive definite") from exc


def sample_record(
    cov: QuadratureCovariance,
    amp: AmplifierModel,
    cfg: DigitizerConfig,
    center_freq,
    workers=1,
) -> VoltageRecord:
    """Draw a filtered record from ``cov`` plus amplifier noise.

    Deterministic in ``cfg.rng_seed``; ``workers`` only changes wall time.
    """
    matrix = np.asarray(getattr(cov, "matrix", cov), dtype=float)
    total = matrix + amp.added_quanta(center_freq) * np.eye(4)
    chol = _factorize(total)
    taps = antialias_taps(cfg.antialias_taps)
    n, m, size = cfg.samples_per_channel, len(taps), cfg.chunk_size
    out = np.empty((4, n))
    n_chunks = -(-n // size)

    def raw(chunk, rows):
        rng = np.random.default_rng(chunk_seed(cfg.rng_seed, chunk))
        return rng.standard_normal((rows, 4)) @ chol.T

    def fill(k):
        start = k * size
        stop = min(start + size, n)
        # 'valid' filtering of output rows [start, stop) needs raw rows
        # [start, stop + m - 1); the tail spills into the next chunk
        block = raw(k, size)
        need = stop - start + m - 1
        if need > size:
            block = np.vstack([block, raw(k + 1, need - size)])
        block = block[:need]
        for c in range(4):
            out[c, start:stop] = np.convolve(block[:, c], taps[::-1], mode="valid")

    if workers > 1 and n_chunks > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(fill, range(n_chunks)))
    else:
        for k in range(n_chunks):
            fill(k)
    return VoltageRecord(
        out, taps=taps, center_freq=center_freq, seed=cfg.rng_seed,
        config=cfg, source_id=covariance_id(matrix),
    )


# --- estimators -------------------------------------------------------------

class Estimate(NamedTuple):
    value: float
    se: float


class ComplexEstimate(NamedTuple):
    value: complex
    se_real: float
    se_imag: float


PAIRS = {
    "I+I-": (I_PLUS, I_MINUS),
    "Q+Q-": (Q_PLUS, Q_MINUS),
    "I+Q-": (I_PLUS, Q_MINUS),
    "I-Q+": (I_MINUS, Q_PLUS),
}


def _mean(x) -> float:
    # numpy's pairwise summation: fixed reduction order for a given length
    return float(np.sum(x) / x.size)


def _se(series, n_eff) -> float:
    return float(np.std(series) / math.sqrt(n_eff))


def _check_length(rec: VoltageRecord, max_lag=0):
    if len(rec) < max(10 * max_lag, 2):
        raise RecordTooShort(f"record of {len(rec)} samples is too short for max_lag {max_lag}")


@dataclass(frozen=True)
class LagCorrelations:
    lags: np.ndarray
    values: dict
    se: dict

    def normalized(self, p_avg):
        return {k: v / p_avg for k, v in self.values.items()}


def cross_correlations(rec: VoltageRecord, max_lag=None) -> LagCorrelations:
    """Biased sample cross-correlations (1/N) sum_t x_t y_{t+k} of the four sideband pairs."""
    if max_lag is None:
        max_lag = rec.config.max_lag if rec.config is not None else 0
    _check_length(rec, max_lag)
    n = len(rec)
    n_eff = rec.n_eff
    lags = np.arange(-max_lag, max_lag + 1)
    values, errors = {}, {}
    ch = rec.channels
    for name, (i, j) in PAIRS.items():
        x, y = ch[i], ch[j]
        vals = np.empty(len(lags))
        ses = np.empty(len(lags))
        for idx, k in enumerate(lags):
            prod = x[: n - k] * y[k:] if k >= 0 else x[-k:] * y[: n + k]
            vals[idx] = float(np.sum(prod) / n)
            ses[idx] = _se(prod, n_eff * prod.size / n)
        values[name] = vals
        errors[name] = ses
    return LagCorrelations(lags, values, errors)


def moment_matrix(rec: VoltageRecord):
    """Zero-lag sample second moments (4x4)."""
    ch = rec.channels
    m = np.empty((4, 4))
    for i in range(4):
        for j in range(i, 4):
            m[i, j] = m[j, i] = _mean(ch[i] * ch[j])
    return m


def _power_series(ch):
    return 0.5 * (ch[I_PLUS] ** 2 + ch[Q_PLUS] ** 2 + ch[I_MINUS] ** 2 + ch[Q_MINUS] ** 2)


def amplifier_power(rec: VoltageRecord, amp: AmplifierModel) -> float:
    """Amplifier contribution to P_avg: 4 quadratures x n_amp x filter gain / 2."""
    if rec.center_freq is None:
        raise ValueError("record has no center frequency; cannot subtract amplifier noise")
    return 2 * amp.added_quanta(rec.center_freq) * rec.filter_gain


def _ratio_estimate(num_series, den_series, den_offset, n_eff):
    num = _mean(num_series)
    den = _mean(den_series) - den_offset
    if den <= 0:
        raise NegativeDenominator(f"average power after subtraction is {den:.4g}")
    value = num / den
    # delta method: influence of each sample on num/den
    influence = (num_series - value * den_series) / den
    return value, _se(influence, n_eff)


def estimate_sigma2(rec: VoltageRecord, amp: AmplifierModel | None = None, subtract_amplifier=False):
    """Zero-lag (<I+I-> - <Q+Q->)/P_avg with a delta-method standard error.

    With ``subtract_amplifier`` the known amplifier variance is removed from
    P_avg first; this undoes the dilution by added noise.
    """
    _check_length(rec)
    ch = rec.channels
    offset = 0.0
    if subtract_amplifier:
        if amp is None:
            raise ValueError("amplifier model required for subtraction")
        offset = amplifier_power(rec, amp)
    num = ch[I_PLUS] * ch[I_MINUS] - ch[Q_PLUS] * ch[Q_MINUS]
    return Estimate(*_ratio_estimate(num, _power_series(ch), offset, rec.n_eff))


def estimate_sigma1(rec: VoltageRecord, sideband="plus"):
    _check_length(rec)
    if sideband in ("plus", "+"):
        i, q = rec.channels[I_PLUS], rec.channels[Q_PLUS]
    elif sideband in ("minus", "-"):
        i, q = rec.channels[I_MINUS], rec.channels[Q_MINUS]
    else:
        raise ValueError(f"sideband must be 'plus' or 'minus', got {sideband!r}")
    i2, q2 = i * i, q * q
    return Estimate(*_ratio_estimate(i2 - q2, i2 + q2, 0.0, rec.n_eff))


def _psi_series(ch):
    re = ch[I_PLUS] * ch[I_MINUS] - ch[Q_PLUS] * ch[Q_MINUS]
    im = ch[I_PLUS] * ch[Q_MINUS] + ch[I_MINUS] * ch[Q_PLUS]
    return re, im


def estimate_psi(rec: VoltageRecord, normalize=False):
    """Zero-lag Psi = (<I+I-> - <Q+Q->) + i(<I+Q-> + <I-Q+>).

    Unnormalized values carry the filter gain; ``normalize=True`` divides by
    P_avg, which makes the estimate gain-invariant.
    """
    _check_length(rec)
    re, im = _psi_series(rec.channels)
    if normalize:
        p = _power_series(rec.channels)
        vr, sr = _ratio_estimate(re, p, 0.0, rec.n_eff)
        vi, si = _ratio_estimate(im, p, 0.0, rec.n_eff)
        return ComplexEstimate(complex(vr, vi), sr, si)
    return ComplexEstimate(
        complex(_mean(re), _mean(im)), _se(re, rec.n_eff), _se(im, rec.n_eff)
    )


def estimate_rotated_psi(rec: VoltageRecord, thetas, normalize=True):
    """Re[e^{-2i theta} Psi] for each digital rotation angle, with standard errors."""
    _check_length(rec)
    re, im = _psi_series(rec.channels)
    p = _power_series(rec.channels) if normalize else None
    values, errors = [], []
    for theta in np.atleast_1d(thetas):
        series = math.cos(2 * theta) * re + math.sin(2 * theta) * im
        if normalize:
            v, s = _ratio_estimate(series, p, 0.0, rec.n_eff)
        else:
            v, s = _mean(series), _se(series, rec.n_eff)
        values.append(v)
        errors.append(s)
    return np.array(values), np.array(errors)


def mean_power(rec: VoltageRecord) -> Estimate:
    """Mean of (I+^2 + Q+^2 + I-^2 + Q-^2)/2: total power of both sidebands in quanta."""
    _check_length(rec)
    p = _power_series(rec.channels)
    return Estimate(_mean(p), _se(p, rec.n_eff))


def chopped_power_difference(rec_on: VoltageRecord, rec_off: VoltageRecord) -> Estimate:
    """Drive-on minus drive-off mean power; amplifier background cancels in the difference."""
    if rec_on.config is not None and rec_off.config is not None:
        if rec_on.config.acquisition_key() != rec_off.config.acquisition_key():
            raise ConfigMismatch("on and off records were acquired with different settings")
    if len(rec_on) != len(rec_off) or not np.array_equal(rec_on.taps, rec_off.taps):
        raise ConfigMismatch("on and off records differ in length or filter")
    if rec_on.center_freq != rec_off.center_freq:
        raise ConfigMismatch("on and off records have different center frequencies")
    on, off = mean_power(rec_on), mean_power(rec_off)
    return Estimate(on.value - off.value, math.hypot(on.se, off.se))


# --- bundled analysis and export --------------------------------------------

@dataclass(frozen=True)
class CorrelationResult:
    lags: np.ndarray
    correlations: dict
    correlation_se: dict
    sigma2: Estimate
    sigma2_subtracted: Estimate | None
    sigma1_plus: Estimate
    sigma1_minus: Estimate
    psi: ComplexEstimate
    psi_normalized: ComplexEstimate
    p_avg: float
    p_avg_subtracted: float | None
    filter_gain: float
    n_samples: int
    n_eff: float

    def to_dict(self):
        def est(e):
            return None if e is None else {"value": e.value, "se": e.se}

        def cest(e):
            return {
                "real": e.value.real, "imag": e.value.imag,
                "se_real": e.se_real, "se_imag": e.se_imag,
            }

        return {
            "format": "dcesim.correlation_result",
            "version": 1,
            "units": {
                "correlations": "vacuum quadrature variance (1/2 = vacuum), filter gain included",
                "sigma": "dimensionless",
                "psi": "vacuum quadrature variance, filter gain included",
                "psi_normalized": "dimensionless (divided by P_avg)",
                "p_avg": "vacuum quadrature variance, filter gain included",
                "lags": "samples",
            },
            "n_samples": self.n_samples,
            "n_eff": self.n_eff,
            "filter_gain": self.filter_gain,
            "lags": self.lags.tolist(),
            "correlations": {
                k: {"value": self.correlations[k].tolist(), "se": self.correlation_se[k].tolist()}
                for k in self.correlations
            },
            "sigma2": est(self.sigma2),
            "sigma2_amplifier_subtracted": est(self.sigma2_subtracted),
            "sigma1_plus": est(self.sigma1_plus),
            "sigma1_minus": est(self.sigma1_minus),
            "psi": cest(self.psi),
            "psi_normalized": cest(self.psi_normalized),
            "p_avg": self.p_avg,
            "p_avg_amplifier_subtracted": self.p_avg_subtracted,
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


def analyze_record(rec: VoltageRecord, amp: AmplifierModel | None = None, max_lag=None) -> CorrelationResult:
    lagged = cross_correlations(rec, max_lag)
    p_avg = mean_power(rec).value
    sub = None
    p_sub = None
    if amp is not None and rec.center_freq is not None:
        p_sub = p_avg - amplifier_power(rec, amp)
        if p_sub > 0:
            sub = estimate_sigma2(rec, amp, subtract_amplifier=True)
    return CorrelationResult(
        lags=lagged.lags,
        correlations=lagged.values,
        correlation_se=lagged.se,
        sigma2=estimate_sigma2(rec),
        sigma2_subtracted=sub,
        sigma1_plus=estimate_sigma1(rec, "plus"),
        sigma1_minus=estimate_sigma1(rec, "minus"),
        psi=estimate_psi(rec),
        psi_normalized=estimate_psi(rec, normalize=True),
        p_avg=p_avg,
        p_avg_subtracted=p_sub,
        filter_gain=rec.filter_gain,
        n_samples=len(rec),
        n_eff=rec.n_eff,
    )


__all__ = [
    "AmplifierModel", "DigitizerConfig", "VoltageRecord", "CorrelationResult",
    "Estimate", "ComplexEstimate", "LagCorrelations", "CHANNELS",
    "antialias_taps", "filter_gain", "filter_autocorrelation", "correlation_length",
    "sample_record", "cross_correlations", "moment_matrix", "estimate_sigma2",
    "estimate_sigma1", "estimate_psi", "estimate_rotated_psi", "mean_power",
    "chopped_power_difference", "analyze_record", "chunk_seed", "covariance_id",
]
