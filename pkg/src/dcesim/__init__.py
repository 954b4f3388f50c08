"""Simulator for parametric photon generation by a SQUID-modulated transmission line boundary."""

__version__ = "0.1.0"

from .physics import (  # noqa: E402
    DeviceParams,
    DriveParams,
    Resonance,
    SpectralEnvironment,
    ThermalEnvironment,
    analytic_sigma2,
    dce_flux_density,
    electrical_length,
    integrated_dce_flux,
    josephson_inductance,
    output_flux_density,
    reflection_coefficient,
    scattering_amplitude,
    spectral_amplitude,
    thermal_occupation,
)
from .gaussian import (  # noqa: E402
    ModulationBasis,
    QuadratureCovariance,
    TwoModeState,
    covariance_matrix,
    psi_correlator,
    rotate_phase,
    sigma1,
    sigma2_modulation,
    sigma2_quadrature,
    state_from_drive,
)
from .measurement import AmplifierModel, DigitizerConfig, VoltageRecord, sample_record  # noqa: E402
