"""Exception types raised across the package."""


class DPHistError(Exception):
    """Base class for all package errors."""


class ParameterError(DPHistError, ValueError):
    """An argument is outside its admissible domain (epsilon <= 0, k < 2, ...)."""


class RangeError(DPHistError, IndexError):
    """A range query does not fit inside the histogram domain."""


class ParseError(DPHistError, ValueError):
    """Malformed input file. ``line`` is 1-based, or None when not line-specific."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ConvergenceError(DPHistError, RuntimeError):
    """An iterative solver stopped before reaching its tolerance."""

    def __init__(self, message: str, residual: float):
        self.residual = residual
        super().__init__(f"{message} (residual {residual:.3e})")
