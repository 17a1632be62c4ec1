"""Exception types shared across the package."""


class G2ModuliError(Exception):
    """Base class for domain errors raised by g2moduli."""


class MetricError(G2ModuliError, ValueError):
    """A metric argument is not symmetric positive definite."""


class DefinitenessError(G2ModuliError, ValueError):
    """A 3-form is not definite (not in the positive GL(7) orbit)."""


class OrientationError(G2ModuliError, ValueError):
    """A linear map reverses orientation where det > 0 is required."""


class ConvergenceError(G2ModuliError, RuntimeError):
    """An iterative solver failed to reach its tolerance."""


class NotCriticalError(G2ModuliError, ValueError):
    """A point offered as critical fails the criticality residual."""


class DegeneracyError(G2ModuliError, ArithmeticError):
    """A quadratic form has an eigenvalue too close to zero."""


class FrameSingularError(G2ModuliError, ArithmeticError):
    """The distinguished conormal component vanishes."""


class DegenerateError(G2ModuliError, ArithmeticError):
    """The second fundamental form is degenerate (H = 0)."""
