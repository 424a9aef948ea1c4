"""Exception types shared across the package."""


class AdiabaticSwitchError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(AdiabaticSwitchError):
    """Invalid or unusable configuration (including failed quadrature)."""


class ValidationError(AdiabaticSwitchError, ValueError):
    """Input matrices, vectors or parameters violate a precondition."""


class UnsupportedOrderError(AdiabaticSwitchError, ValueError):
    """Requested derivative order exceeds what the schedule supports."""


class GevreyFitError(AdiabaticSwitchError):
    """No feasible (C, R) pair exists on the search grid."""


class GapCollapseError(AdiabaticSwitchError):
    """The selected band is not separated from the rest of the spectrum."""


class TrackingError(AdiabaticSwitchError):
    """Band tracking between grid points is ambiguous or discontinuous."""


class NearSingularError(AdiabaticSwitchError):
    """Resolvent requested too close to the spectrum."""


class StiffnessError(AdiabaticSwitchError):
    """Adaptive integration step size underflowed."""


class BoundRangeError(AdiabaticSwitchError, OverflowError):
    """A bound is not representable even in log-space."""


class InfeasibleTruncationError(AdiabaticSwitchError):
    """The optimal-truncation precondition fails (run time too short)."""


class DomainError(AdiabaticSwitchError, ValueError):
    """Argument outside the mathematical domain of a formula."""


class BudgetError(AdiabaticSwitchError):
    """A requested run time exceeds the configured integrator budget."""

    def __init__(self, message, largest_feasible_gap=None):
        super().__init__(message)
        self.largest_feasible_gap = largest_feasible_gap


class NormalizationWarning(UserWarning):
    """Endpoint Hamiltonians are not normalized to unit operator norm."""


class ResolutionWarning(UserWarning):
    """Chebyshev tableau is under-resolved on the collocation grid."""
