"""Exception hierarchy shared by all locmem modules."""


class LocmemError(Exception):
    """Base class for every error raised by locmem."""

    exit_code = 1


class ConfigurationError(LocmemError, ValueError):
    """Invalid or infeasible configuration (wavelet order, plan, flags)."""

    exit_code = 2


class DomainError(ConfigurationError):
    """A parameter lies outside the domain where a quantity is defined."""


class ScaleDepthError(ConfigurationError):
    """Requested scale is too coarse for the available sample size."""

    def __init__(self, requested, max_feasible, T):
        self.requested = requested
        self.max_feasible = max_feasible
        self.T = T
        super().__init__(
            f"scale {requested} is too deep for T={T}; "
            f"maximum feasible scale is {max_feasible}"
        )


class BoundaryError(LocmemError, ValueError):
    """Localization weights cannot be formed at the requested rescaled time."""

    exit_code = 2


class AdvisoryError(ConfigurationError):
    """No feasible (L, b) pair exists for the requested sample size."""


class DataError(LocmemError, ValueError):
    """Input data could not be parsed or is unusable."""

    exit_code = 3


class PrecisionError(LocmemError, ArithmeticError):
    """A numerical approximation could not reach its tolerance."""

    exit_code = 4


class TruncationWarning(UserWarning):
    """The truncated MA representation drops a noticeable share of variance."""
