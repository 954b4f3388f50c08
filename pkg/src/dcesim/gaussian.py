"""Exact Gaussian state of a sideband pair and the squeezing statistics built on it.

Quadratures use the dimensionless convention I = (a + a^dag)/sqrt(2),
Q = -i (a - a^dag)/sqrt(2), so the vacuum variance of each is 1/2. The basis
order of every covariance matrix is (I+, Q+, I-, Q-).
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, replace

import numpy as np

from .constants import HBAR
from .errors import AsymmetricScattering, DegenerateSidebands, UnphysicalState
from .physics import (
    DeviceParams,
    DriveParams,
    SpectralEnvironment,
    reflection_coefficient,
    scattering_amplitude,
    thermal_occupation,
)

I_PLUS, Q_PLUS, I_MINUS, Q_MINUS = range(4)
CHANNELS = ("I_plus", "Q_plus", "I_minus", "Q_minus")

ASYMMETRY_LIMIT = 0.10
PHYSICALITY_TOL = 1e-9

_OMEGA = np.array([[0.0, 1.0], [-1.0, 0.0]])
SYMPLECTIC_FORM = np.kron(np.eye(2), _OMEGA)


@dataclass(frozen=True)
class TwoModeState:
    """Zero-mean Gaussian state of the pair (omega_plus, omega_minus).

    Fully described by the two occupations <a^dag a> and the anomalous pair
    correlator ``psi_corr`` = <a+ a->; all other second moments vanish.
    """

    n_plus: float
    n_minus: float
    psi_corr: complex
    omega_plus: float
    omega_minus: float
    omega_d: float

    def __post_init__(self):
        if self.n_plus < 0 or self.n_minus < 0:
            raise UnphysicalState("occupations must be non-negative")
        if not math.isclose(self.omega_plus + self.omega_minus, self.omega_d, rel_tol=1e-9):
            raise ValueError("sideband frequencies must sum to omega_d")
        object.__setattr__(self, "psi_corr", complex(self.psi_corr))

    @property
    def epsilon(self) -> float:
        return (self.omega_plus - self.omega_minus) / 2

    @classmethod
    def vacuum(cls, omega_plus, omega_minus):
        return cls(0.0, 0.0, 0j, omega_plus, omega_minus, omega_plus + omega_minus)

    @classmethod
    def squeezed_vacuum(cls, r, phase, omega_plus, omega_minus):
        """Two-mode squeezed vacuum exp[r(e^{i phase} a+^dag a-^dag - h.c.)]|00>."""
        n = math.sinh(r) ** 2
        psi = cmath.exp(1j * phase) * math.cosh(r) * math.sinh(r)
        return cls(n, n, psi, omega_plus, omega_minus, omega_plus + omega_minus)


@dataclass(frozen=True)
class QuadratureCovariance:
    """Symmetrized second moments of (I+, Q+, I-, Q-) in vacuum-1/2 units.

    ``volt_scale`` holds sqrt(hbar omega Z_0 / 8 pi) for each sideband. It is
    never folded into ``matrix``; multiply by it only when exporting volts.
    """

    matrix: np.ndarray
    omega_plus: float | None = None
    omega_minus: float | None = None
    volt_scale: tuple[float, float] | None = None

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.shape != (4, 4):
            raise ValueError(f"covariance must be 4x4, got {m.shape}")
        if not np.allclose(m, m.T, rtol=0, atol=1e-15 * max(1.0, np.abs(m).max())):
            raise ValueError("covariance must be symmetric")
        m = (m + m.T) / 2
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def __getitem__(self, idx):
        return self.matrix[idx]

    def __eq__(self, other):
        if not isinstance(other, QuadratureCovariance):
            return NotImplemented
        return (
            np.array_equal(self.matrix, other.matrix)
            and self.omega_plus == other.omega_plus
            and self.omega_minus == other.omega_minus
        )

    __hash__ = None

    def with_added_noise(self, variance):
        """Covariance after phase-insensitive noise of ``variance`` per quadrature."""
        return replace(self, matrix=self.matrix + variance * np.eye(4))

    def volts(self):
        """Covariance in volts^2 using the recorded per-sideband scale."""
        if self.volt_scale is None:
            raise ValueError("no volt scale recorded for this covariance")
        s = np.repeat(np.asarray(self.volt_scale), 2)
        return self.matrix * np.outer(s, s)


@dataclass(frozen=True)
class ModulationBasis:
    """Rescaled two-photon modulation operators at detuning epsilon.

    alpha_1 = (l+ a+ + l- a-^dag)/sqrt2 and alpha_2 = (-i l+ a+ + i l- a-^dag)/sqrt2,
    with l_pm = sqrt(2 omega_pm / omega_d) mapping quanta at omega_pm onto the
    center frequency.
    """

    epsilon: float
    omega_d: float

    @property
    def omega_plus(self):
        return self.omega_d / 2 + self.epsilon

    @property
    def omega_minus(self):
        return self.omega_d / 2 - self.epsilon

    @property
    def lambda_plus(self):
        return math.sqrt(2 * self.omega_plus / self.omega_d)

    @property
    def lambda_minus(self):
        return math.sqrt(2 * self.omega_minus / self.omega_d)

    @classmethod
    def for_state(cls, state: TwoModeState):
        return cls(state.epsilon, state.omega_d)

    def coefficients(self):
        """Rows (coefficient of a+, coefficient of a-^dag) for alpha_1, alpha_2."""
        lp, lm = self.lambda_plus, self.lambda_minus
        s = math.sqrt(2)
        return np.array([[lp / s, lm / s], [-1j * lp / s, 1j * lm / s]])


@dataclass(frozen=True)
class BogoliubovTransform:
    """Exact two-mode squeeze plus local rotations.

    a+_out = e^{i phase_plus} (cosh r a+ + e^{i phi} sinh r a-^dag)
    a-_out = e^{i phase_minus} (cosh r a- + e^{i phi} sinh r a+^dag)

    where phi = pair_phase - phase_plus - phase_minus. ``pair_phase`` is the
    phase of the output correlator <a+ a->. ``r_plus``/``r_minus`` keep the
    per-sideband squeeze parameters behind the single ``r``.
    """

    r: float
    pair_phase: float
    phase_plus: float = 0.0
    phase_minus: float = 0.0
    r_plus: float | None = None
    r_minus: float | None = None

    def coefficients(self):
        """((u+, v+), (u-, v-)) with a+_out = u+ a+ + v+ a-^dag, a-_out = u- a- + v- a+^dag."""
        c, s = math.cosh(self.r), math.sinh(self.r)
        up = cmath.exp(1j * self.phase_plus) * c
        um = cmath.exp(1j * self.phase_minus) * c
        vp = cmath.exp(1j * (self.pair_phase - self.phase_minus)) * s
        vm = cmath.exp(1j * (self.pair_phase - self.phase_plus)) * s
        return (up, vp), (um, vm)

    def apply(self, n_plus_in, n_minus_in, omega_plus, omega_minus):
        """Output state for an uncorrelated thermal input with the given occupations."""
        (up, vp), (um, vm) = self.coefficients()
        n_plus = abs(up) ** 2 * n_plus_in + abs(vp) ** 2 * (n_minus_in + 1)
        n_minus = abs(um) ** 2 * n_minus_in + abs(vm) ** 2 * (n_plus_in + 1)
        psi = up * vm * (n_plus_in + 1) + vp * um * n_minus_in
        return TwoModeState(n_plus, n_minus, psi, omega_plus, omega_minus, omega_plus + omega_minus)


def bogoliubov_from_scattering(R_plus, S_plus, R_minus, S_minus, asymmetry_limit=ASYMMETRY_LIMIT):
    """Lift first-order reflection/conversion amplitudes to an exact symplectic transform.

    The squeeze parameter is r = asinh|S| (|S| averaged over the two
    sidebands). The correlator phase is that of (R+ S- + R- S+)/2, which is the
    first-order <a+ a-> whether or not the supplied amplitudes commute exactly.

    Raises
    ------
    AsymmetricScattering
        If |S+| and |S-| differ by more than ``asymmetry_limit`` relative. The
        two-parameter transform (r from the geometric mean) rides along as
        ``exc.fallback``.
    """
    mp, mm = abs(S_plus), abs(S_minus)
    phase_plus = cmath.phase(R_plus) if R_plus else 0.0
    phase_minus = cmath.phase(R_minus) if R_minus else 0.0
    pair = R_plus * S_minus + R_minus * S_plus
    pair_phase = cmath.phase(pair) if pair else 0.0
    top = max(mp, mm)
    if top > 0 and abs(mp - mm) / top > asymmetry_limit:
        fallback = BogoliubovTransform(
            math.asinh(math.sqrt(mp * mm)), pair_phase, phase_plus, phase_minus,
            r_plus=math.asinh(mp), r_minus=math.asinh(mm),
        )
        raise AsymmetricScattering(
            f"|S+| = {mp:.4g} and |S-| = {mm:.4g} differ by more than "
            f"{asymmetry_limit:.0%}", fallback=fallback,
        )
    return BogoliubovTransform(
        math.asinh((mp + mm) / 2), pair_phase, phase_plus, phase_minus,
        r_plus=math.asinh(mp), r_minus=math.asinh(mm),
    )


def sideband_pair(omega_plus, omega_d, min_separation=0.0):
    """Validate and return (omega_plus, omega_minus) for a pair about omega_d/2."""
    omega_minus = omega_d - omega_plus
    if not 0 < omega_minus:
        raise ValueError("omega_plus must be below omega_d")
    if omega_plus - omega_minus <= max(min_separation, 1e-12 * omega_d):
        raise DegenerateSidebands(
            "omega_plus must exceed omega_d/2 by at least half the minimum separation"
        )
    return omega_plus, omega_minus


def state_from_drive(
    omega_plus,
    drive: DriveParams,
    env: SpectralEnvironment,
    dev: DeviceParams,
    T=0.0,
    flux=0.0,
    min_separation=0.0,
) -> TwoModeState:
    """Output state of the sideband pair under the boundary drive.

    The thermal input at temperature ``T`` passes through the exact
    Bogoliubov lift of the first-order scattering amplitudes.
    """
    omega_plus, omega_minus = sideband_pair(omega_plus, drive.omega_d, min_separation)
    transform = bogoliubov_from_scattering(
        reflection_coefficient(omega_plus, flux, dev),
        scattering_amplitude(omega_plus, drive, env, dev),
        reflection_coefficient(omega_minus, flux, dev),
        scattering_amplitude(omega_minus, drive, env, dev),
    )
    return transform.apply(
        thermal_occupation(omega_plus, T),
        thermal_occupation(omega_minus, T),
        omega_plus,
        omega_minus,
    )


def rotate_phase(state: TwoModeState, theta) -> TwoModeState:
    """Rotate both sideband fields by theta (a -> a e^{-i theta})."""
    return replace(state, psi_corr=state.psi_corr * cmath.exp(-2j * theta))


def align_phase(state: TwoModeState):
    """Rotate the frame so the pair correlator is real and non-negative.

    Returns the aligned state and the rotation angle that was applied.
    """
    theta = cmath.phase(state.psi_corr) / 2 if state.psi_corr else 0.0
    return rotate_phase(state, theta), theta


def symplectic_eigenvalues(matrix):
    """Symplectic spectrum of a two-mode covariance (each value once, ascending)."""
    eig = np.linalg.eigvals(1j * SYMPLECTIC_FORM @ np.asarray(matrix, dtype=float))
    return np.sort(np.abs(eig.real))[::2]


def check_physical(matrix, tol=PHYSICALITY_TOL):
    nu = symplectic_eigenvalues(matrix)
    if nu.min() < 0.5 - tol:
        raise UnphysicalState(f"symplectic eigenvalue {nu.min():.6g} < 1/2")
    return nu


def volt_scale(omega, Z_0):
    """sqrt(hbar omega Z_0 / 8 pi), the volt-per-unit-quadrature prefactor."""
    return math.sqrt(HBAR * omega * Z_0 / (8 * math.pi))


def covariance_matrix(state: TwoModeState, Z_0=None) -> QuadratureCovariance:
    """Quadrature covariance of a pair state.

    <I+I-> = Re psi, <Q+Q-> = -Re psi, <I+Q-> = <I-Q+> = Im psi and the
    diagonal is n + 1/2.
    """
    p = state.psi_corr
    v = np.zeros((4, 4))
    v[I_PLUS, I_PLUS] = v[Q_PLUS, Q_PLUS] = state.n_plus + 0.5
    v[I_MINUS, I_MINUS] = v[Q_MINUS, Q_MINUS] = state.n_minus + 0.5
    v[I_PLUS, I_MINUS] = v[I_MINUS, I_PLUS] = p.real
    v[Q_PLUS, Q_MINUS] = v[Q_MINUS, Q_PLUS] = -p.real
    v[I_PLUS, Q_MINUS] = v[Q_MINUS, I_PLUS] = p.imag
    v[I_MINUS, Q_PLUS] = v[Q_PLUS, I_MINUS] = p.imag
    check_physical(v)
    scale = None
    if Z_0 is not None:
        scale = (volt_scale(state.omega_plus, Z_0), volt_scale(state.omega_minus, Z_0))
    return QuadratureCovariance(v, state.omega_plus, state.omega_minus, scale)


def modulation_matrix(state: TwoModeState, basis: ModulationBasis | None = None):
    """Symmetrized spectral matrix Sigma_mn = <alpha_m alpha_n^dag + alpha_n^dag alpha_m>/2."""
    basis = basis or ModulationBasis.for_state(state)
    coef = basis.coefficients()
    p, q = coef[:, 0], coef[:, 1]
    npl, nmi, psi = state.n_plus, state.n_minus, state.psi_corr
    # <alpha_m alpha_n^dag> and <alpha_n^dag alpha_m> from <a+a+^dag> = n+ + 1,
    # <a-^dag a-> = n-, <a+ a-> = psi; cross moments between a+ and a-^dag vanish
    pp = np.outer(p, p.conj())
    pq = np.outer(p, q.conj())
    qp = np.outer(q, p.conj())
    qq = np.outer(q, q.conj())
    forward = pp * (npl + 1) + pq * psi + qp * psi.conjugate() + qq * nmi
    backward = pp * npl + qp * psi.conjugate() + pq * psi + qq * (nmi + 1)
    return (forward + backward) / 2


def sigma2_modulation(state: TwoModeState, basis: ModulationBasis | None = None) -> float:
    """Two-mode squeezing (Sigma_11 - Sigma_22)/(Sigma_11 + Sigma_22) in the modulation basis."""
    if basis is not None and not (
        math.isclose(basis.omega_plus, state.omega_plus, rel_tol=1e-9)
        and math.isclose(basis.omega_d, state.omega_d, rel_tol=1e-9)
    ):
        raise ValueError("modulation basis frequencies do not match the state")
    sig = modulation_matrix(state, basis).real
    return float((sig[0, 0] - sig[1, 1]) / (sig[0, 0] + sig[1, 1]))


def average_power(cov) -> float:
    """P_avg: half the summed quadrature variances of both sidebands."""
    m = np.asarray(getattr(cov, "matrix", cov))
    return float(np.trace(m) / 2)


def sigma2_quadrature(cov) -> float:
    """(<I+I-> - <Q+Q->) / P_avg."""
    m = np.asarray(getattr(cov, "matrix", cov))
    return float((m[I_PLUS, I_MINUS] - m[Q_PLUS, Q_MINUS]) / average_power(m))


def sigma1(cov, sideband="plus") -> float:
    """One-mode squeezing (<I^2> - <Q^2>)/(<I^2> + <Q^2>) of one sideband."""
    m = np.asarray(getattr(cov, "matrix", cov))
    i, q = _sideband_index(sideband)
    return float((m[i, i] - m[q, q]) / (m[i, i] + m[q, q]))


def _sideband_index(sideband):
    if sideband in ("plus", "+"):
        return I_PLUS, Q_PLUS
    if sideband in ("minus", "-"):
        return I_MINUS, Q_MINUS
    raise ValueError(f"sideband must be 'plus' or 'minus', got {sideband!r}")


def psi_correlator(cov) -> complex:
    """Psi = (<I+I-> - <Q+Q->) + i(<I+Q-> + <I-Q+>)."""
    m = np.asarray(getattr(cov, "matrix", cov))
    return complex(
        m[I_PLUS, I_MINUS] - m[Q_PLUS, Q_MINUS],
        m[I_PLUS, Q_MINUS] + m[I_MINUS, Q_PLUS],
    )


def rotation_matrix(theta):
    """Quadrature map for a -> a e^{-i theta} applied to both sidebands."""
    c, s = math.cos(theta), math.sin(theta)
    block = np.array([[c, s], [-s, c]])
    return np.kron(np.eye(2), block)


def rotate_covariance(cov: QuadratureCovariance, theta) -> QuadratureCovariance:
    rot = rotation_matrix(theta)
    return replace(cov, matrix=rot @ cov.matrix @ rot.T)
