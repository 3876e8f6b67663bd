"""Exception hierarchy shared by the toolkit and mapped to CLI exit codes."""


class FbmCltError(Exception):
    """Base class for every error raised by fbmclt."""


class DomainError(FbmCltError, ValueError):
    """An argument lies outside the domain of the operation."""


class RegimeError(DomainError):
    """(H, d) lies outside 1/(d+2) < H < 1/d, where C_{H,d} diverges."""


class ConfigError(FbmCltError, ValueError):
    """Invalid experiment configuration."""


class PlanningError(ConfigError):
    """The requested run is infeasible (horizon or memory) before sampling."""


class NumericalError(FbmCltError, ArithmeticError):
    """A numerical procedure failed to converge or produced garbage."""


class SamplingError(NumericalError):
    """No exact sampler is available for the requested grid."""


class FactorizationError(NumericalError):
    """A covariance matrix is not (numerically) positive definite."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class CalibrationError(NumericalError):
    """Dual-reference calibration of the Riesz constant is inconsistent."""


class ConsistencyError(NumericalError):
    """A quantity that must be nonnegative came out negative."""


class MembershipError(DomainError):
    """A function fails the H_0^beta membership conditions."""
