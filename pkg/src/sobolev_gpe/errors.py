"""Exception hierarchy shared across the package."""


class SobolevGpeError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(SobolevGpeError):
    """Invalid grid, model, or solver configuration."""


class DimensionError(SobolevGpeError):
    """Array length does not match the grid."""


class NumericError(SobolevGpeError):
    """Non-finite values where finite ones are required."""


class DomainError(SobolevGpeError):
    """Input outside the mathematical domain of an operation (e.g. zero vector)."""


class SolverError(SobolevGpeError):
    """Iteration-level failure. May carry diagnostic payload attributes."""


class NonConvergenceError(SolverError):
    """Linear solver exhausted its iteration budget.

    Carries ``residual`` (final relative residual) and ``iterations``.
    """

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class OperatorError(SobolevGpeError):
    """Operator violates a structural assumption (e.g. loss of positive definiteness)."""


class EigensolverError(SolverError):
    """Eigenpair iteration stagnated. Carries ``residuals`` achieved so far."""

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals or []


class DiagnosticError(SobolevGpeError):
    """A certification routine cannot produce a meaningful report."""
