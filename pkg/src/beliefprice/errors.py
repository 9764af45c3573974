"""Exception hierarchy shared by all modules."""


class PricingError(Exception):
    """Base class for every error raised by this package."""


class DomainError(PricingError, ValueError):
    """An argument lies outside the domain of the function (e.g. a price <= 0)."""


class InvalidParameterError(PricingError, ValueError):
    """A model parameter violates its invariants."""


class InfeasibleMomentsError(InvalidParameterError):
    """Moment targets that no admissible density can reproduce."""


class ConvergenceError(PricingError, ArithmeticError):
    """An iterative method stopped before reaching its tolerance.

    ``residual`` carries the last achieved error measure so callers can
    report how far off the iteration ended.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class QuadratureError(ConvergenceError):
    """Adaptive quadrature could not meet its tolerance."""


class OutOfBandError(PricingError, ValueError):
    """A target price outside the no-arbitrage band of the instrument."""


class InfeasibleError(PricingError):
    """No candidate allocation satisfies the risk limits."""
