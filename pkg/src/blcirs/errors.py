"""Exception types shared across the package."""

__all__ = [
    "BlcirsError",
    "DimensionMismatch",
    "NonFiniteBlock",
    "Breakdown",
    "RankDeficient",
    "AssumptionViolated",
    "MatrixMarketError",
    "FetchError",
    "UnknownMatrix",
]


class BlcirsError(Exception):
    """Base class for all package-specific errors."""


class DimensionMismatch(BlcirsError, ValueError):
    """Operands have incompatible shapes."""


class NonFiniteBlock(BlcirsError, FloatingPointError):
    """A block contains NaN or Inf entries (overflow or invalid input)."""


class Breakdown(BlcirsError):
    """Numerical singularity of an s-by-s system; halts the block iteration."""


class RankDeficient(Breakdown):
    """A tall block handed to QR is numerically rank deficient.

    ``column`` is the 0-based index of the first offending column of the
    triangular factor.
    """

    def __init__(self, message, column=None):
        super().__init__(message)
        self.column = column


class AssumptionViolated(BlcirsError):
    """A rounding-error bound was evaluated outside its validity domain."""


class MatrixMarketError(BlcirsError, ValueError):
    """Malformed Matrix Market input."""


class FetchError(BlcirsError):
    """Matrix download failed (network or archive problem, not a parse error)."""


class UnknownMatrix(FetchError):
    """Matrix name is not in the known-group registry and no group was given."""
