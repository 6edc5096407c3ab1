"""Exception types shared across the package."""


class SymrdError(Exception):
    """Base class for all package-specific errors."""


# -- pair validation ---------------------------------------------------------

class NonSquare(SymrdError):
    """Distortion matrix is not square."""


class InvalidEntry(SymrdError):
    """Distortion entry is not an exact nonnegative rational."""


class NotPermutationSymmetric(SymrdError):
    """Rows (or columns) are not permutations of one another."""


class ZeroColumn(SymrdError):
    """Some column of the distortion matrix is identically zero."""


class NoZeroInRow(SymrdError):
    """Some row of the distortion matrix has no zero entry."""


# -- per-operation errors ----------------------------------------------------

class LengthMismatch(SymrdError):
    """Source and reconstruction blocks have different lengths."""


class SymbolOutOfRange(SymrdError):
    """A symbol index falls outside the alphabet."""


class OutOfRange(SymrdError):
    """A distortion level or parameter is outside its admissible interval."""


class NonConvergence(SymrdError):
    """Iterative solver failed to reach the requested tolerance."""


class NotCurved(SymrdError):
    """Curvature gap is nonpositive at the requested flanking points."""


class BudgetExceeded(SymrdError):
    """Exact computation would exceed the configured size budget."""


class EmptyEvent(SymrdError):
    """Conditioning event has probability zero."""


class EpsilonTooLarge(SymrdError):
    """Requested epsilon falls outside the admissibility window."""


class CapExceeded(SymrdError):
    """No acceptable codeword was found within the index cap."""


class MalformedBits(SymrdError):
    """Bitstring cannot be decoded under the declared code layout."""


class SegmentNotLinear(SymrdError):
    """Slope scan found no certifiable linear segment of the rate curve."""


class QuantileDegenerate(SymrdError):
    """Requested quantile mass cannot be realized from the spectrum."""
