"""Exception types shared across the package."""


class BiRankError(Exception):
    """Base class for all errors raised by this package."""


class GraphError(BiRankError, ValueError):
    """Invalid graph construction or malformed graph input.

    ``path`` and ``lineno`` are set when the error comes from a file.
    """

    def __init__(self, message, path=None, lineno=None):
        self.path = path
        self.lineno = lineno
        if lineno is not None:
            where = f"{path}:{lineno}" if path is not None else f"line {lineno}"
            message = f"{where}: {message}"
        elif path is not None:
            message = f"{path}: {message}"
        super().__init__(message)


class NumericError(BiRankError, ArithmeticError):
    """A computation produced non-finite values or hit a singular system."""


class OracleSizeError(BiRankError, ValueError):
    """A dense oracle was asked to handle a graph above its size cap."""
