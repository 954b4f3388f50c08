"""Exception and warning types raised across the package."""


class DCEError(Exception):
    """Base class for all package errors."""


class DegenerateFlux(DCEError, ValueError):
    """Flux bias sits on a half-integer flux quantum; the SQUID inductance diverges."""


class OutOfBand(DCEError, ValueError):
    """Frequency lies outside the open interval (0, omega_d)."""


class QuadratureFailure(DCEError, RuntimeError):
    """Adaptive quadrature did not reach its tolerance within the iteration budget."""


class AsymmetricScattering(DCEError, ValueError):
    """Sideband scattering magnitudes differ too much for a single squeeze parameter.

    The two-parameter fallback transform is attached as ``fallback``.
    """

    def __init__(self, message, fallback=None):
        super().__init__(message)
        self.fallback = fallback


class DegenerateSidebands(DCEError, ValueError):
    """The two sidebands coincide (epsilon below the minimum separation)."""


class UnphysicalState(DCEError, ValueError):
    """A covariance matrix violates the uncertainty principle."""


class CutoffTooSmall(DCEError, ValueError):
    """Fock-space truncation leaves too much population in the top level."""


class FactorizationFailure(DCEError, RuntimeError):
    """Covariance could not be factorized even after jitter."""


class RecordTooShort(DCEError, ValueError):
    """Record length is too short for the requested lag window."""


class NegativeDenominator(DCEError, ValueError):
    """Amplifier subtraction drove the average sideband power to zero or below."""


class ConfigMismatch(DCEError, ValueError):
    """Two records that must share acquisition settings do not."""


class RecordFormatError(DCEError, ValueError):
    """A serialized voltage record is malformed."""


class SchemaError(DCEError, ValueError):
    """Configuration document violates the schema.

    ``path`` is the dotted field path the problem was found at.
    """

    def __init__(self, path, reason):
        self.path = path
        self.reason = reason
        super().__init__(f"{path}: {reason}" if path else reason)


class VersionError(DCEError, ValueError):
    """Configuration or file format version is not supported."""


class PerturbativeWarning(UserWarning):
    """Boundary velocity is large enough that first-order scattering formulas degrade."""
