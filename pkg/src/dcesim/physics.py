"""Closed-form device physics of a SQUID-terminated transmission line.

Flux-tunable Josephson inductance, the electrical length it corresponds to,
static reflection, the first-order parametric scattering amplitude under a
sinusoidal boundary drive, output photon spectra and the analytic two-mode
squeezing statistic.

All frequencies are angular (rad/s) and all inputs are SI. Spectral densities
are dimensionless occupations (photons per second per hertz of bandwidth).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import integrate

from .constants import FLUX_QUANTUM, HBAR, K_B
from .errors import (
    DegenerateFlux,
    OutOfBand,
    PerturbativeWarning,
    QuadratureFailure,
)

#: |cos(pi flux / flux_quantum)| below this is treated as a divergent inductance.
DEGENERATE_FLUX_TOL = 1e-9

#: Boundary velocity ratio above which first-order scattering is flagged.
PERTURBATIVE_LIMIT = 0.25

Q_RANGE = (1.0, 1e6)


@dataclass(frozen=True)
class DeviceParams:
    """Transmission line and SQUID constants.

    ``c_0`` and ``Z_0`` are derived from the per-length inductance and
    capacitance and never stored separately.
    """

    L_J0: float = 0.23e-9
    L_0: float = 4.6e-7
    C_0: float = 4.6e-7 / 50.0**2
    flux_quantum: float = FLUX_QUANTUM

    def __post_init__(self):
        for name in ("L_J0", "L_0", "C_0", "flux_quantum"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be strictly positive, got {value!r}")

    @property
    def c_0(self) -> float:
        return 1.0 / math.sqrt(self.L_0 * self.C_0)

    @property
    def Z_0(self) -> float:
        return math.sqrt(self.L_0 / self.C_0)

    @classmethod
    def from_impedance(cls, L_J0, Z_0, c_0, flux_quantum=FLUX_QUANTUM):
        """Build from characteristic impedance and phase velocity instead of L_0, C_0."""
        return cls(L_J0=L_J0, L_0=Z_0 / c_0, C_0=1.0 / (Z_0 * c_0), flux_quantum=flux_quantum)


@dataclass(frozen=True)
class DriveParams:
    """Sinusoidal modulation of the electrical length.

    ``theta_d`` is the drive phase referred to the sideband frame: shifting it
    rotates the pair correlator by ``exp(-2j*theta_d)``, the same as a field
    rotation by ``theta_d``.
    """

    omega_d: float
    delta_len: float
    theta_d: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.omega_d) and self.omega_d > 0):
            raise ValueError(f"omega_d must be positive, got {self.omega_d!r}")
        if not (np.isfinite(self.delta_len) and self.delta_len >= 0):
            raise ValueError(f"delta_len must be non-negative, got {self.delta_len!r}")

    @property
    def v_e(self) -> float:
        """Peak velocity of the effective boundary (m/s)."""
        return self.delta_len * self.omega_d

    def velocity_ratio(self, dev: DeviceParams) -> float:
        return self.v_e / dev.c_0

    @classmethod
    def from_velocity_ratio(cls, omega_d, ratio, dev: DeviceParams, theta_d=0.0):
        return cls(omega_d=omega_d, delta_len=ratio * dev.c_0 / omega_d, theta_d=theta_d)


def check_drive(drive: DriveParams, dev: DeviceParams) -> float:
    """Validate the boundary velocity against the line's light speed.

    Returns v_e/c_0. Raises for superluminal boundaries and warns above
    ``PERTURBATIVE_LIMIT``.
    """
    ratio = drive.velocity_ratio(dev)
    if ratio >= 1:
        raise ValueError(f"boundary velocity ratio v_e/c_0 = {ratio:.3g} must be < 1")
    if ratio > PERTURBATIVE_LIMIT:
        warnings.warn(
            f"v_e/c_0 = {ratio:.3g} exceeds {PERTURBATIVE_LIMIT}; first-order scattering "
            "formulas are unreliable here",
            PerturbativeWarning,
            stacklevel=3,
        )
    return ratio


@dataclass(frozen=True)
class Resonance:
    center: float  # rad/s
    q: float
    peak: float | None = None  # |A|^2 at center; None means q**2

    def __post_init__(self):
        if not self.center > 0:
            raise ValueError(f"resonance center must be positive, got {self.center!r}")
        if not Q_RANGE[0] <= self.q <= Q_RANGE[1]:
            raise ValueError(f"quality factor must lie in {Q_RANGE}, got {self.q!r}")
        if self.peak is not None and not self.peak > 0:
            raise ValueError(f"peak amplitude must be positive, got {self.peak!r}")

    @property
    def peak_power(self) -> float:
        return self.q**2 if self.peak is None else self.peak


@dataclass(frozen=True)
class SpectralEnvironment:
    """Density-of-states model |A(omega)|^2 of the output line."""

    kind: str = "flat"
    resonances: tuple[Resonance, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.kind not in ("flat", "resonant"):
            raise ValueError(f"kind must be 'flat' or 'resonant', got {self.kind!r}")
        object.__setattr__(self, "resonances", tuple(self.resonances))
        if self.kind == "flat" and self.resonances:
            raise ValueError("a flat environment carries no resonances")

    @classmethod
    def flat(cls):
        return cls("flat")

    @classmethod
    def resonant(cls, resonances: Sequence[Resonance | tuple]):
        res = tuple(r if isinstance(r, Resonance) else Resonance(*r) for r in resonances)
        return cls("resonant", res)


@dataclass(frozen=True)
class ThermalEnvironment:
    temperature: float = 0.050

    def __post_init__(self):
        if not (np.isfinite(self.temperature) and self.temperature >= 0):
            raise ValueError(f"temperature must be >= 0, got {self.temperature!r}")


def _as_float_or_array(x):
    return x.item() if isinstance(x, np.ndarray) and x.ndim == 0 else x


def _cos_factor(flux, dev):
    c = np.abs(np.cos(np.pi * np.asarray(flux, dtype=float) / dev.flux_quantum))
    if np.any(c < DEGENERATE_FLUX_TOL):
        raise DegenerateFlux(
            "flux is within tolerance of a half-integer flux quantum; "
            "the SQUID inductance diverges"
        )
    return c


def josephson_inductance(flux, dev: DeviceParams):
    """Symmetric-SQUID Josephson inductance L_J0 / |cos(pi flux / flux_quantum)|."""
    return _as_float_or_array(dev.L_J0 / _cos_factor(flux, dev))


def electrical_length(flux, dev: DeviceParams):
    """Length of bare line whose inductance equals the SQUID's, L_J / L_0 (m)."""
    return _as_float_or_array(josephson_inductance(flux, dev) / dev.L_0)


def reflection_from_length(omega, length, c_0):
    """-exp(2i k length) for wavenumber k = omega / c_0."""
    return _as_float_or_array(-np.exp(2j * np.asarray(omega, dtype=float) / c_0 * length))


def reflection_coefficient(omega, flux, dev: DeviceParams):
    """Static reflection off the SQUID, a pure phase set by the electrical length."""
    omega = np.asarray(omega, dtype=float)
    if np.any(omega <= 0):
        raise ValueError("omega must be positive")
    return reflection_from_length(omega, electrical_length(flux, dev), dev.c_0)


def spectral_amplitude(omega, env: SpectralEnvironment):
    """Complex line amplitude A(omega).

    Each resonance multiplies in a factor whose squared magnitude is a unit
    background plus a Lorentzian of full width ``center / Q`` peaking at the
    configured amplitude, ``1 + (peak - 1) / (1 + (2 Q (omega - center) / center)**2)``.
    Its phase is that of the driven-oscillator response ``g / (g - i (omega - center))``.
    """
    omega = np.asarray(omega, dtype=float)
    amp = np.ones_like(omega, dtype=complex)
    for res in env.resonances:
        half_width = res.center / (2 * res.q)
        lorentz = half_width / (half_width - 1j * (omega - res.center))
        mag = np.sqrt(1 + (res.peak_power - 1) * np.abs(lorentz) ** 2)
        amp = amp * mag * lorentz / np.abs(lorentz)
    return _as_float_or_array(amp)


def _check_band(omega, omega_d):
    omega = np.asarray(omega, dtype=float)
    if np.any((omega <= 0) | (omega >= omega_d)):
        raise OutOfBand(f"omega must lie in (0, omega_d = {omega_d:.6g})")
    return omega


def scattering_amplitude(omega, drive: DriveParams, env: SpectralEnvironment, dev: DeviceParams):
    """First-order amplitude for converting an input quantum at omega_d - omega into one at omega."""
    check_drive(drive, dev)
    omega = _check_band(omega, drive.omega_d)
    partner = drive.omega_d - omega
    s = (
        -1j
        * (drive.delta_len / dev.c_0)
        * np.sqrt(omega * partner)
        * spectral_amplitude(omega, env)
        * np.conj(spectral_amplitude(partner, env))
    )
    if drive.theta_d:
        s = s * np.exp(-2j * drive.theta_d)
    return _as_float_or_array(s)


def thermal_occupation(omega, T):
    """Bose-Einstein occupation of a mode at angular frequency omega and temperature T."""
    omega = np.asarray(omega, dtype=float)
    if np.any(omega <= 0):
        raise ValueError("omega must be positive")
    if T < 0:
        raise ValueError("temperature must be >= 0")
    if T == 0:
        return _as_float_or_array(np.zeros_like(omega))
    return _as_float_or_array(1.0 / np.expm1(HBAR * omega / (K_B * T)))


def output_flux_density(omega, drive, env, dev, T=0.0):
    """Output occupation: reflected thermal + upconverted thermal + vacuum (DCE) terms."""
    s2 = np.abs(scattering_amplitude(omega, drive, env, dev)) ** 2
    if T == 0:
        return _as_float_or_array(s2)
    n_here = thermal_occupation(omega, T)
    n_partner = thermal_occupation(drive.omega_d - np.asarray(omega, dtype=float), T)
    return _as_float_or_array(n_here + s2 * n_partner + s2)


def dce_flux_density(omega, drive: DriveParams, dev: DeviceParams):
    """Vacuum-driven output occupation of an ideal (flat) line."""
    check_drive(drive, dev)
    omega = _check_band(omega, drive.omega_d)
    return _as_float_or_array((drive.delta_len / dev.c_0) ** 2 * omega * (drive.omega_d - omega))


_QUAD_EPSABS = 1e-30
_QUAD_EPSREL = 1e-9
_QUAD_LIMIT = 200


def _quad(func, a, b, points=None):
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            value, abserr = integrate.quad(
                func, a, b, epsabs=_QUAD_EPSABS, epsrel=_QUAD_EPSREL,
                limit=_QUAD_LIMIT, points=points,
            )
        except integrate.IntegrationWarning as exc:
            raise QuadratureFailure(str(exc)) from exc
    if abserr > max(_QUAD_EPSABS, 1e-6 * abs(value)):
        raise QuadratureFailure(f"estimated error {abserr:.3g} too large for value {value:.3g}")
    return value


def integrated_dce_flux(drive: DriveParams, dev: DeviceParams, method="closed_form"):
    """Total DCE photon flux (photons/s) of an ideal line, summed over (0, omega_d).

    ``method="numeric"`` integrates the spectral density with adaptive
    Gauss-Kronrod quadrature instead of the closed form.
    """
    ratio = check_drive(drive, dev)
    if method == "closed_form":
        return drive.omega_d / (12 * math.pi) * ratio**2
    if method != "numeric":
        raise ValueError(f"unknown method {method!r}")
    if drive.delta_len == 0:
        return 0.0
    wd = drive.omega_d
    # integrate in x = omega/omega_d; the integrand vanishes at both open ends
    value = _quad(lambda x: dce_flux_density(x * wd, drive, dev), 0.0, 1.0)
    return wd * value / (2 * math.pi)


def integrated_output_flux(drive, env, dev, band=None, T=0.0):
    """Output photon flux (photons/s) integrated over ``band`` (default: (0, omega_d))."""
    check_drive(drive, dev)
    wd = drive.omega_d
    lo, hi = band if band is not None else (0.0, wd)
    if not 0 <= lo < hi <= wd:
        raise OutOfBand("integration band must lie inside [0, omega_d]")
    if drive.delta_len == 0 and T == 0:
        return 0.0

    def integrand(x):
        return output_flux_density(x * wd, drive, env, dev, T)

    inner = [
        c / wd
        for r in env.resonances
        for c in (r.center, wd - r.center)
        if lo < c < hi
    ]
    value = _quad(integrand, lo / wd, hi / wd, points=sorted(set(inner)) or None)
    return wd * value / (2 * math.pi)


def flux_enhancement(drive, env, dev, band=None):
    """Ratio of vacuum-driven output flux in ``band`` for ``env`` over a flat line."""
    flat = integrated_output_flux(drive, SpectralEnvironment.flat(), dev, band)
    return integrated_output_flux(drive, env, dev, band) / flat


def analytic_sigma2(epsilon, drive: DriveParams, dev: DeviceParams):
    """Ideal-line two-mode squeezing statistic at detuning epsilon from omega_d/2."""
    check_drive(drive, dev)
    epsilon = np.asarray(epsilon, dtype=float)
    if np.any((epsilon < 0) | (epsilon >= drive.omega_d / 2)):
        raise OutOfBand("epsilon must lie in [0, omega_d/2)")
    k = drive.delta_len / dev.c_0
    prod = (drive.omega_d / 2 + epsilon) * (drive.omega_d / 2 - epsilon)
    return _as_float_or_array(2 * prod / drive.omega_d * k / (1 + prod * k**2))
