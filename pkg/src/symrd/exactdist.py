"""Exact distributions of block distortion under the uniform proposal.

Everything here runs on the integer grid: with grid denominator ``q``, the
per-letter distortion takes integer values ``q * d`` and the block total
``T = sum_i q * d(x_i, Y_i)`` is an integer in ``[0, n * q * d_max]``.  The
law of ``T`` under ``Y ~ uniform^n`` does not depend on the source block
(row symmetry), and by column symmetry the same law governs distortion to a
fixed reconstruction block under a uniform source.  Counts are exact Python
integers, so spectra and ball probabilities are exact rationals.

Membership in a distortion ball of rational radius ``D`` is the integer
comparison ``T <= floor(n * q * D)``; no float ever decides it.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Optional

import numpy as np

from .errors import BudgetExceeded, EmptyEvent, OutOfRange
from .model import SymmetricPair

# Cells of the exact DP table before we insist on the log-domain fallback.
DEFAULT_CELL_BUDGET = 1 << 22


def _as_rational(value, what: str = "distortion level") -> Fraction:
    if isinstance(value, float):
        raise OutOfRange(
            f"{what} must be exact: pass a Fraction, int or 'p/q' string, not float {value!r}"
        )
    try:
        return Fraction(value)
    except (ValueError, TypeError, ZeroDivisionError) as exc:
        raise OutOfRange(f"cannot parse {what} {value!r}") from exc


def _letter_multiplicities(pair: SymmetricPair) -> list[tuple[int, int]]:
    """Distinct per-letter grid values with multiplicities, ascending."""
    return sorted(Counter(pair.letter_ints).items())


@dataclass(frozen=True)
class DistortionSpectrum:
    """Exact pmf of the integer block-distortion total.

    ``counts[t]`` is the number of reconstruction blocks (weighted by
    multiplicity) at total ``t``; probabilities are ``counts[t] / total``
    with ``total = alphabet_size ** n``.
    """

    n: int
    q: int
    counts: tuple[int, ...]
    total: int

    def pmf(self, t: int) -> Fraction:
        if 0 <= t < len(self.counts):
            return Fraction(self.counts[t], self.total)
        return Fraction(0)

    def support(self) -> range:
        return range(len(self.counts))

    def as_fractions(self) -> dict[int, Fraction]:
        return {
            t: Fraction(c, self.total)
            for t, c in enumerate(self.counts)
            if c
        }

    def ball_count(self, d) -> int:
        """Number of blocks within average distortion ``d`` of the center."""
        d = _as_rational(d)
        thr = math.floor(self.n * self.q * d)
        if thr < 0:
            return 0
        return sum(self.counts[: thr + 1])


@dataclass(frozen=True)
class BallProbability:
    n: int
    d: Fraction
    prob: Optional[Fraction]
    log_prob: float
    approx: bool


class SpectrumAccumulator:
    """Incrementally extends the exact spectrum one letter at a time.

    Sweeps over blocklengths reuse the running counts instead of rebuilding
    the n-fold convolution from scratch for every n.
    """

    def __init__(self, pair: SymmetricPair, cell_budget: int = DEFAULT_CELL_BUDGET):
        self.pair = pair
        self.cell_budget = cell_budget
        self.n = 0
        self.counts: list[int] = [1]
        self.total = 1
        self._mult = _letter_multiplicities(pair)
        self._vmax = self._mult[-1][0]

    def step(self) -> None:
        counts = self.counts
        size = len(counts)
        if size + self._vmax > self.cell_budget:
            raise BudgetExceeded(
                f"spectrum support would exceed {self.cell_budget} cells at n={self.n + 1}"
            )
        new = [0] * (size + self._vmax)
        for v, m in self._mult:
            seg = counts if m == 1 else [m * c for c in counts]
            window = new[v : v + size]
            new[v : v + size] = [a + b for a, b in zip(window, seg)]
        self.counts = new
        self.total *= self.pair.alphabet_size
        self.n += 1

    def advance_to(self, n: int) -> None:
        while self.n < n:
            self.step()

    def threshold(self, d) -> int:
        return math.floor(self.n * self.pair.q * _as_rational(d))

    def ball_count(self, d) -> int:
        thr = self.threshold(d)
        if thr < 0:
            return 0
        return sum(self.counts[: thr + 1])

    def weighted_ball_count(self, d) -> int:
        """Sum of t * counts[t] over the ball, for conditional means."""
        thr = self.threshold(d)
        if thr < 0:
            return 0
        return sum(t * c for t, c in enumerate(self.counts[: thr + 1]))

    def snapshot(self) -> DistortionSpectrum:
        return DistortionSpectrum(
            n=self.n, q=self.pair.q, counts=tuple(self.counts), total=self.total
        )


def spectrum(pair: SymmetricPair, n: int, *, cell_budget: int = DEFAULT_CELL_BUDGET) -> DistortionSpectrum:
    """Exact n-fold spectrum of the per-letter integer distortion."""
    return _spectrum_cached(pair, n, cell_budget)


@lru_cache(maxsize=8)
def _spectrum_cached(pair: SymmetricPair, n: int, cell_budget: int) -> DistortionSpectrum:
    if n < 1:
        raise OutOfRange(f"blocklength must be >= 1, got {n}")
    est_cells = n * max(pair.letter_ints) + 1
    if est_cells > cell_budget:
        raise BudgetExceeded(
            f"spectrum needs {est_cells} cells, budget is {cell_budget}"
        )
    acc = SpectrumAccumulator(pair, cell_budget=cell_budget)
    acc.advance_to(n)
    return acc.snapshot()


def _log_ball_probability(pair: SymmetricPair, n: int, d: Fraction) -> float:
    """Log-domain DP fallback; absolute log-error grows at most like 1e-9 * n."""
    mult = _letter_multiplicities(pair)
    vmax = mult[-1][0]
    k = pair.alphabet_size
    letter = np.full(vmax + 1, -np.inf)
    for v, m in mult:
        letter[v] = math.log(m) - math.log(k)
    cur = letter.copy()
    for _ in range(n - 1):
        new = np.full(len(cur) + vmax, -np.inf)
        for v, m in mult:
            lw = math.log(m) - math.log(k)
            new[v : v + len(cur)] = np.logaddexp(new[v : v + len(cur)], cur + lw)
        cur = new
    thr = math.floor(n * pair.q * d)
    if thr < 0:
        return -np.inf
    thr = min(thr, len(cur) - 1)
    from scipy.special import logsumexp

    return float(logsumexp(cur[: thr + 1]))


def ball_probability(
    pair: SymmetricPair,
    n: int,
    d,
    *,
    method: str = "exact",
    cell_budget: int = DEFAULT_CELL_BUDGET,
) -> BallProbability:
    """P(d(x^n, Y^n) <= d) under the uniform proposal, center-independent.

    ``method='exact'`` returns the rational probability and its log;
    ``method='log'`` runs the float DP and flags the result approximate.
    """
    d = _as_rational(d)
    if d < 0:
        raise OutOfRange(f"radius must be nonnegative, got {d}")
    if method == "log":
        lp = _log_ball_probability(pair, n, d)
        return BallProbability(n=n, d=d, prob=None, log_prob=lp, approx=True)
    if method != "exact":
        raise OutOfRange(f"unknown method {method!r}")
    spec = spectrum(pair, n, cell_budget=cell_budget)
    count = spec.ball_count(d)
    if count == 0:
        return BallProbability(n=n, d=d, prob=Fraction(0), log_prob=-math.inf, approx=False)
    prob = Fraction(count, spec.total)
    log_prob = math.log(count) - n * math.log(pair.alphabet_size)
    return BallProbability(n=n, d=d, prob=prob, log_prob=log_prob, approx=False)


def conditional_tail_mean(pair: SymmetricPair, n: int, c, *, cell_budget: int = DEFAULT_CELL_BUDGET) -> Fraction:
    """Exact E[S_n | S_n >= c] where S_n is minus the average distortion.

    The event ``S_n >= c`` is the distortion ball of radius ``-c``; raises
    EmptyEvent when that ball is empty (c > 0).
    """
    c = _as_rational(c, "threshold")
    spec = spectrum(pair, n, cell_budget=cell_budget)
    thr = math.floor(n * pair.q * (-c))
    if thr < 0:
        raise EmptyEvent(f"S_n is never above {c}")
    thr = min(thr, len(spec.counts) - 1)
    mass = sum(spec.counts[: thr + 1])
    if mass == 0:
        raise EmptyEvent(f"no block meets S_n >= {c}")
    weighted = sum(t * cnt for t, cnt in enumerate(spec.counts[: thr + 1]))
    return -Fraction(weighted, n * pair.q * mass)


@dataclass(frozen=True)
class BallSmallestVerdict:
    holds: bool
    subset: Optional[tuple[int, ...]] = None
    radius: Optional[Fraction] = None

    def __bool__(self) -> bool:
        return self.holds


def ball_smallest_oracle(pair: SymmetricPair, n: int, *, max_strings: int = 20) -> BallSmallestVerdict:
    """Exhaustively check that distortion balls maximize probability.

    For the fixed center y^n = (0,...,0): every nonempty A subset of X^n
    whose conditional mean distortion is at most that of a ball B must
    satisfy P(A) <= P(B).  Enumerates all 2^{k^n} - 1 subsets, so the
    precondition k^n <= max_strings is enforced.
    """
    k = pair.alphabet_size
    num = k**n
    if num > max_strings:
        raise BudgetExceeded(f"{num} strings exceeds the enumeration limit {max_strings}")

    ints = pair.matrix.int_entries
    # distortion totals (integer grid) of every source block to the center
    dvals: list[int] = []

    def build(prefix_total: int, depth: int) -> None:
        if depth == n:
            dvals.append(prefix_total)
            return
        for x in range(k):
            build(prefix_total + ints[x][0], depth + 1)

    build(0, 0)

    radii = sorted(set(dvals))
    balls = []
    for t in radii:
        members = [i for i, v in enumerate(dvals) if v <= t]
        size = len(members)
        total = sum(dvals[i] for i in members)
        balls.append((t, size, total))

    # subset sums via lowest-set-bit recursion
    sums = [0] * (1 << num)
    sizes = [0] * (1 << num)
    for mask in range(1, 1 << num):
        low = (mask & -mask).bit_length() - 1
        rest = mask & (mask - 1)
        sums[mask] = sums[rest] + dvals[low]
        sizes[mask] = sizes[rest] + 1

    for mask in range(1, 1 << num):
        a_size = sizes[mask]
        a_sum = sums[mask]
        for t, b_size, b_sum in balls:
            # mean(A) <= mean(B)  <=>  a_sum * b_size <= b_sum * a_size
            if a_sum * b_size <= b_sum * a_size and a_size > b_size:
                members = tuple(i for i in range(num) if mask >> i & 1)
                return BallSmallestVerdict(
                    holds=False,
                    subset=members,
                    radius=Fraction(t, n * pair.q),
                )
    return BallSmallestVerdict(holds=True)
