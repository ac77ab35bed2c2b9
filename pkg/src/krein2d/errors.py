"""Exception hierarchy shared by all modules."""


class KreinError(Exception):
    """Base class for every error raised by this package."""


class DomainError(KreinError, ValueError):
    """An argument lies outside the domain of the requested operation."""


class UnsupportedBackendError(KreinError, TypeError):
    """The manifold model cannot serve the requested operation."""


class NoPairsError(KreinError, ValueError):
    """A pairwise quantity was requested for fewer than two centers."""


class DivergenceError(KreinError, ValueError):
    """The requested kernel value is infinite (coincident points)."""


class ContractViolation(KreinError, ValueError):
    """Input violates a structural contract, e.g. a non-symmetric matrix."""


class ConfigurationError(KreinError, ValueError):
    """A configuration of centers breaks one of its invariants."""


class NoCrossingError(KreinError, RuntimeError):
    """No zero crossing of the smallest eigenvalue could be bracketed."""


class AtBoundStateError(KreinError, RuntimeError):
    """The principal matrix is singular: the energy sits on a bound state."""


class ThresholdError(DomainError):
    """A series bound was evaluated below its convergence threshold.

    Attributes
    ----------
    critical_nu : float
        Smallest admissible value of nu (exclusive).
    """

    def __init__(self, message, critical_nu):
        super().__init__(message)
        self.critical_nu = critical_nu


class ValidityError(ThresholdError):
    """The generic norm bound was evaluated outside its validity ray."""


class IncompatibleCertificateError(KreinError, ValueError):
    """A certificate does not apply to the configuration it is checked on."""


class QuadratureWarning(RuntimeWarning):
    """Adaptive quadrature did not reach the requested tolerance."""


class BesselUnderflowWarning(RuntimeWarning):
    """A modified Bessel function underflowed and was returned as zero."""
