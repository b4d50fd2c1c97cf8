"""Exception hierarchy shared by all rootiter modules."""


class RootIterError(Exception):
    """Base class for every error raised by rootiter."""


class PoleError(RootIterError, ZeroDivisionError):
    """A rational function was evaluated at (or numerically at) a pole."""


class DegenerateError(RootIterError, ValueError):
    """Input is degenerate for the requested operation (e.g. constant polynomial)."""


class MultiplePoleError(RootIterError):
    """Denominator roots are not separated enough for a simple-pole expansion."""


class CapacityError(RootIterError):
    """Requested size exceeds what the implementation supports."""


class DomainError(RootIterError, ValueError):
    """A parameter lies outside the domain of the operation."""


class ConvergenceError(RootIterError):
    """An iterative solver failed to converge.

    ``best_error`` and ``defect`` carry the last levelled error and the
    relative spread of the alternation set when available.
    """

    def __init__(self, message, best_error=None, defect=None):
        super().__init__(message)
        self.best_error = best_error
        self.defect = defect


class DimensionError(RootIterError, ValueError):
    """Matrix dimensions do not agree."""


class SingularMatrixError(RootIterError, ArithmeticError):
    """A matrix that must be inverted is (numerically) singular."""


class DivergenceError(RootIterError, ArithmeticError):
    """An iteration left its region of convergence."""


class MatrixMarketError(RootIterError, ValueError):
    """Malformed Matrix Market input; ``line`` is 1-based when known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class IterateOverflowError(RootIterError, OverflowError):
    """An iterate grew past the overflow guard."""
