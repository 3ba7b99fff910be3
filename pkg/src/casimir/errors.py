"""Exception hierarchy shared by all modules."""


class CasimirError(Exception):
    """Base class for every error raised by the package."""


class DomainError(CasimirError, ValueError):
    """An argument lies outside the domain where the quantity is defined."""


class ConvergenceError(CasimirError, ArithmeticError):
    """A series, product, quadrature or root search did not converge."""


class SaturationError(ConvergenceError, OverflowError):
    """A result exceeds the representable floating-point range."""


class SpectrumError(CasimirError):
    """Root scan of a dispersion relation failed to classify the spectrum."""


class HagedornViolation(DomainError):
    """Inverse temperature at or below the Hagedorn point (plus safety margin)."""
