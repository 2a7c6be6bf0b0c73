"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of the quantity being evaluated."""


class ConvergenceError(ArithmeticError):
    """A series did not reach its tolerance within the allowed number of terms."""


class QuadratureError(ArithmeticError):
    """Adaptive quadrature failed to meet its tolerance."""


class ConsistencyError(RuntimeError):
    """Two evaluations of the same quantity disagree beyond tolerance."""
