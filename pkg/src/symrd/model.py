"""Source/reconstruction alphabets with exact rational distortion matrices.

A pair is *symmetric* when the source is uniform, every row of the
distortion matrix is a permutation of every other row, every column is a
permutation of every other column, no column is identically zero, and every
row contains a zero.  Under these conditions the per-letter distortion seen
from any fixed source symbol (or any fixed reconstruction symbol) is the
same multiset of values, which is what makes ball probabilities
center-independent and drives everything else in this package.

All matrix entries are exact ``fractions.Fraction`` values on a common
integer grid: ``q * d(x, y)`` is an integer for the stored denominator
``q``.  Exactness here is deliberate; distortion comparisons elsewhere are
integer comparisons on that grid, never float thresholding.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

from .errors import (
    InvalidEntry,
    LengthMismatch,
    NonSquare,
    NotPermutationSymmetric,
    NoZeroInRow,
    OutOfRange,
    SymbolOutOfRange,
    ZeroColumn,
)

# Tilts above this are treated as the infinite-tilt limit (mean 0).
LAMBDA_CAP = 1e6


def _as_fraction(entry) -> Fraction:
    """Parse one matrix entry exactly. Floats are rejected on purpose."""
    if isinstance(entry, bool):
        raise InvalidEntry(f"boolean entry {entry!r}")
    if isinstance(entry, (int, Fraction)):
        value = Fraction(entry)
    elif isinstance(entry, str):
        try:
            value = Fraction(entry)
        except (ValueError, ZeroDivisionError) as exc:
            raise InvalidEntry(f"cannot parse entry {entry!r}") from exc
    elif isinstance(entry, float):
        raise InvalidEntry(
            f"float entry {entry!r}: write it as a 'p/q' string to keep parsing exact"
        )
    else:
        raise InvalidEntry(f"unsupported entry type {type(entry).__name__}")
    if value < 0:
        raise InvalidEntry(f"negative entry {entry!r}")
    return value


@dataclass(frozen=True)
class DistortionMatrix:
    """Square matrix of exact rational distortions on an integer grid.

    ``q`` is the least common denominator: ``q * entries[x][y]`` is always
    an integer.  ``d_max`` is the largest entry; the distortion range is
    ``[0, d_max]`` with both endpoints attained somewhere.
    """

    entries: tuple[tuple[Fraction, ...], ...]
    q: int
    d_max: Fraction

    @property
    def size(self) -> int:
        return len(self.entries)

    @cached_property
    def int_entries(self) -> tuple[tuple[int, ...], ...]:
        """Entries scaled by ``q``, as plain integers."""
        return tuple(
            tuple(int(e * self.q) for e in row) for row in self.entries
        )

    def row(self, x: int) -> tuple[Fraction, ...]:
        return self.entries[x]

    def column(self, y: int) -> tuple[Fraction, ...]:
        return tuple(row[y] for row in self.entries)


@dataclass(frozen=True)
class SymmetricPair:
    """A validated symmetric source-distortion pair (uniform source).

    ``sigma2`` is the smallest per-column distortion variance under the
    uniform source and ``d_star`` the common column mean: the distortion of
    describing the source with a single fixed reconstruction symbol, which
    is where the rate curve hits zero.
    """

    matrix: DistortionMatrix
    alphabet_size: int
    sigma2: Fraction
    d_star: Fraction
    name: str = ""

    @property
    def d_max(self) -> Fraction:
        return self.matrix.d_max

    @property
    def q(self) -> int:
        return self.matrix.q

    @cached_property
    def letter_values(self) -> tuple[Fraction, ...]:
        """Sorted multiset of per-letter distortions (same for every row
        and every column)."""
        return tuple(sorted(self.matrix.entries[0]))

    @cached_property
    def letter_floats(self) -> tuple[float, ...]:
        return tuple(float(v) for v in self.letter_values)

    @cached_property
    def letter_ints(self) -> tuple[int, ...]:
        """Per-letter distortions on the integer grid (scaled by ``q``)."""
        return tuple(int(v * self.q) for v in self.letter_values)

    def describe(self) -> dict:
        return {
            "name": self.name,
            "alphabet_size": self.alphabet_size,
            "grid_denominator": self.q,
            "d_star": str(self.d_star),
            "sigma2": str(self.sigma2),
            "d_max": str(self.d_max),
        }


@dataclass(frozen=True)
class TiltedChannel:
    """Row-stochastic test channel W(y|x) proportional to exp(-lambda d(x,y))."""

    lam: float
    conditional_pmf: tuple[tuple[float, ...], ...]

    def row(self, x: int) -> tuple[float, ...]:
        return self.conditional_pmf[x]

    def output_marginal(self) -> tuple[float, ...]:
        """Output distribution under a uniform input (uniform by symmetry)."""
        k = len(self.conditional_pmf)
        return tuple(
            sum(self.conditional_pmf[x][y] for x in range(k)) / k for y in range(k)
        )


@dataclass(frozen=True)
class TiltedSourceDistribution:
    """Exponentially tilted source law around a reconstruction symbol.

    pmf(x) is proportional to exp(-lambda d(x, y)) under the uniform source.
    """

    lam: float
    center: int
    pmf: tuple[float, ...]

    def mean_distortion(self, pair: SymmetricPair) -> float:
        col = pair.matrix.column(self.center)
        return sum(p * float(d) for p, d in zip(self.pmf, col))


def validate_pair(raw_matrix, *, name: str = "") -> SymmetricPair:
    """Validate a raw matrix (rows of ints / 'p/q' strings / Fractions).

    Raises NonSquare, InvalidEntry, ZeroColumn, NoZeroInRow or
    NotPermutationSymmetric.  On success returns the immutable pair with
    the grid denominator, cutoff distortion and variance floor populated.
    """
    rows = [tuple(_as_fraction(e) for e in row) for row in raw_matrix]
    k = len(rows)
    if k == 0 or any(len(row) != k for row in rows):
        raise NonSquare(f"expected a square matrix, got row lengths {[len(r) for r in rows]}")

    columns = [tuple(row[y] for row in rows) for y in range(k)]
    for y, col in enumerate(columns):
        if all(e == 0 for e in col):
            raise ZeroColumn(f"column {y} is identically zero")
    for x, row in enumerate(rows):
        if 0 not in row:
            raise NoZeroInRow(f"row {x} contains no zero entry")

    row_multiset = sorted(rows[0])
    for x, row in enumerate(rows[1:], start=1):
        if sorted(row) != row_multiset:
            raise NotPermutationSymmetric(f"row {x} is not a permutation of row 0")
    col_multiset = sorted(columns[0])
    for y, col in enumerate(columns[1:], start=1):
        if sorted(col) != col_multiset:
            raise NotPermutationSymmetric(f"column {y} is not a permutation of column 0")

    q = 1
    for row in rows:
        for e in row:
            q = q * e.denominator // math.gcd(q, e.denominator)
    d_max = max(max(row) for row in rows)

    means = [Fraction(sum(col), k) for col in columns]
    d_star = means[0]
    if any(m != d_star for m in means):
        # cannot happen once column symmetry holds; kept as a hard guard
        raise NotPermutationSymmetric("column means disagree")
    variances = [
        Fraction(sum((e - d_star) ** 2 for e in col), k) for col in columns
    ]
    sigma2 = min(variances)
    if sigma2 <= 0:
        raise ZeroColumn("some column is constant, so its variance vanishes")

    matrix = DistortionMatrix(entries=tuple(rows), q=q, d_max=d_max)
    return SymmetricPair(
        matrix=matrix, alphabet_size=k, sigma2=sigma2, d_star=d_star, name=name
    )


def pair_from_dict(obj: dict) -> SymmetricPair:
    """Build a pair from a parsed definition file (see schemas/pair.schema.json)."""
    if "distortion" not in obj:
        raise InvalidEntry("pair definition is missing the 'distortion' field")
    pair = validate_pair(obj["distortion"], name=obj.get("name", ""))
    alphabet = obj.get("alphabet")
    if alphabet is not None:
        declared = alphabet if isinstance(alphabet, int) else len(alphabet)
        if declared != pair.alphabet_size:
            raise NonSquare(
                f"alphabet declares {declared} symbols, matrix has {pair.alphabet_size}"
            )
    return pair


def load_pair(path) -> SymmetricPair:
    with open(path, "r", encoding="utf-8") as fh:
        return pair_from_dict(json.load(fh))


def binary_hamming() -> SymmetricPair:
    return validate_pair([[0, 1], [1, 0]], name="binary-hamming")


def ternary_hamming() -> SymmetricPair:
    return validate_pair(
        [[0, 1, 1], [1, 0, 1], [1, 1, 0]], name="ternary-hamming"
    )


def hamming(k: int) -> SymmetricPair:
    rows = [[0 if x == y else 1 for y in range(k)] for x in range(k)]
    return validate_pair(rows, name=f"hamming-{k}")


def block_distortion(x, y, pair: SymmetricPair) -> Fraction:
    """Average per-letter distortion of two equal-length blocks, exactly."""
    if len(x) != len(y):
        raise LengthMismatch(f"block lengths differ: {len(x)} vs {len(y)}")
    if len(x) == 0:
        raise LengthMismatch("blocks must have length at least 1")
    k = pair.alphabet_size
    ints = pair.matrix.int_entries
    total = 0
    for xi, yi in zip(x, y):
        if not (0 <= xi < k and 0 <= yi < k):
            raise SymbolOutOfRange(f"symbol pair ({xi}, {yi}) outside alphabet of size {k}")
        total += ints[xi][yi]
    return Fraction(total, len(x) * pair.q)


def _tilt_weights(pair: SymmetricPair, lam: float) -> list[float]:
    # every row contains a zero, so the largest weight is exp(0) = 1 and the
    # normalizer never vanishes
    return [math.exp(-lam * d) for d in pair.letter_floats]


def tilted_mean(pair: SymmetricPair, lam: float) -> float:
    """Mean distortion under the lambda-tilted per-letter law.

    Equals d_star at lam = 0, decreases strictly, and tends to 0 as the
    tilt grows (the minimum over each row is 0).  Tilts above LAMBDA_CAP
    return the limit exactly.
    """
    _check_tilt(lam)
    if lam >= LAMBDA_CAP:
        return 0.0
    w = _tilt_weights(pair, lam)
    z = sum(w)
    return sum(wi * d for wi, d in zip(w, pair.letter_floats)) / z


def _check_tilt(lam) -> None:
    if lam < 0 or not math.isfinite(lam):
        raise OutOfRange(f"tilt must be finite and nonnegative, got {lam!r}")


def tilted_channel(pair: SymmetricPair, lam: float) -> TiltedChannel:
    """Test channel with rows proportional to exp(-lambda d(x, .))."""
    _check_tilt(lam)
    lam = min(lam, LAMBDA_CAP)
    rows = []
    for x in range(pair.alphabet_size):
        w = [math.exp(-lam * float(d)) for d in pair.matrix.row(x)]
        z = sum(w)
        rows.append(tuple(wi / z for wi in w))
    return TiltedChannel(lam=lam, conditional_pmf=tuple(rows))


def tilted_source(pair: SymmetricPair, lam: float, center: int = 0) -> TiltedSourceDistribution:
    """Tilted source law with respect to one reconstruction symbol."""
    _check_tilt(lam)
    if not (0 <= center < pair.alphabet_size):
        raise SymbolOutOfRange(f"center {center} outside alphabet")
    lam = min(lam, LAMBDA_CAP)
    col = pair.matrix.column(center)
    w = [math.exp(-lam * float(d)) for d in col]
    z = sum(w)
    return TiltedSourceDistribution(
        lam=lam, center=center, pmf=tuple(wi / z for wi in w)
    )
