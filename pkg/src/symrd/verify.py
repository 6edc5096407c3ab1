"""Self-check registry: run every module's invariants against one pair.

These are desk-scale versions of the invariants the test suite pins down;
the CLI's verify-all subcommand prints one line per check.  Each check
returns (passed, detail) and never raises on a clean failure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np

from . import codec, exactdist, ldbounds
from .converse import converse_config, finite_n_lower_bound
from .errors import SymrdError
from .experiments import geometric_index_samples, semifaithful_roundtrips
from .model import SymmetricPair, tilted_channel, tilted_mean
from .rdsolve import blahut_arimoto_pair, curvature_certificate, rate_distortion

LAMBDA_GRID = (0.0, 0.05, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0, 25.0, 50.0)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _d_grid(pair: SymmetricPair, points: int = 9) -> list[float]:
    d_star = float(pair.d_star)
    return [d_star * i / (points + 1) for i in range(1, points + 1)]


def check_symmetry_multisets(pair: SymmetricPair):
    rows = [sorted(r) for r in pair.matrix.entries]
    cols = [sorted(pair.matrix.column(y)) for y in range(pair.alphabet_size)]
    ok = all(r == rows[0] for r in rows) and all(c == rows[0] for c in cols)
    return ok, "row and column multisets coincide"


def check_channel_marginal_uniform(pair: SymmetricPair):
    worst = 0.0
    for lam in LAMBDA_GRID:
        marg = tilted_channel(pair, lam).output_marginal()
        worst = max(worst, max(abs(m - 1.0 / pair.alphabet_size) for m in marg))
    return worst <= 1e-12, f"max marginal deviation {worst:.2e}"


def check_tilted_mean_monotone(pair: SymmetricPair):
    vals = [tilted_mean(pair, lam) for lam in LAMBDA_GRID]
    ok = all(a > b for a, b in zip(vals, vals[1:]))
    return ok, "tilted mean strictly decreasing on the grid"


def check_tilted_mean_vanishes(pair: SymmetricPair):
    m = tilted_mean(pair, 200.0)
    return m < 1e-3, f"tilted mean at 200 is {m:.2e}"


def check_tilted_variance_floor(pair: SymmetricPair):
    sigma2 = float(pair.sigma2)
    d_max = float(pair.d_max)
    worst = math.inf
    for lam in LAMBDA_GRID:
        _, var, _ = ldbounds.tilted_letter_stats(pair, lam)
        worst = min(worst, var - math.exp(-2.0 * lam * d_max) * sigma2)
    return worst >= -1e-15, f"min floor slack {worst:.2e}"


def check_rd_identities(pair: SymmetricPair):
    worst = 0.0
    for d in _d_grid(pair):
        pt = rate_distortion(pair, d)
        ev = ldbounds.rate_function(pair, d)
        worst = max(worst, abs(pt.rate - ev.rate))
        ba = blahut_arimoto_pair(pair, pt.slope)
        worst = max(worst, abs(pt.rate - ba.rate))
    return worst <= 1e-7, f"max identity violation {worst:.2e}"


def check_rd_convexity(pair: SymmetricPair):
    grid = _d_grid(pair, 11)
    ok = True
    for a, b in zip(grid, grid[2:]):
        mid = rate_distortion(pair, (a + b) / 2).rate
        chord = 0.5 * (rate_distortion(pair, a).rate + rate_distortion(pair, b).rate)
        ok = ok and mid <= chord + 1e-10
    return ok, "midpoint convexity on the grid"


def check_rd_slope(pair: SymmetricPair):
    worst = 0.0
    h = 1e-6 * float(pair.d_star)
    for d in _d_grid(pair, 5):
        pt = rate_distortion(pair, d)
        fd = (rate_distortion(pair, d + h).rate - rate_distortion(pair, d - h).rate) / (2 * h)
        worst = max(worst, abs(fd - pt.slope))
    return worst <= 1e-5, f"max slope mismatch {worst:.2e}"


def check_curvature(pair: SymmetricPair):
    try:
        gaps = [curvature_certificate(pair, d).gap for d in _d_grid(pair, 5)]
    except SymrdError as exc:
        return False, str(exc)
    return min(gaps) > 0, f"min curvature gap {min(gaps):.3e}"


def check_spectrum_total(pair: SymmetricPair):
    for n in (1, 2, 5, 9):
        spec = exactdist.spectrum(pair, n)
        if sum(spec.counts) != spec.total:
            return False, f"mass mismatch at n={n}"
    return True, "spectral mass exactly 1"


def check_ball_monotone(pair: SymmetricPair):
    d_max = pair.d_max
    n = 6
    grid = [d_max * Fraction(i, 12) for i in range(13)]
    probs = [exactdist.ball_probability(pair, n, d).prob for d in grid]
    ok = all(a <= b for a, b in zip(probs, probs[1:])) and probs[-1] == 1
    return ok, "ball probability nondecreasing, 1 at d_max"


def check_conditional_mean_threshold(pair: SymmetricPair):
    n = 5
    for num in range(0, 10):
        c = -pair.d_max * Fraction(num, 9)
        mean = exactdist.conditional_tail_mean(pair, n, c)
        if mean < c:
            return False, f"conditional mean below threshold at c={c}"
    return True, "E[S_n | S_n >= c] >= c on the grid"


def check_ball_smallest(pair: SymmetricPair):
    n = 3 if pair.alphabet_size == 2 else 2
    if pair.alphabet_size**n > 20:
        return True, "skipped: alphabet too large for exhaustive oracle"
    verdict = exactdist.ball_smallest_oracle(pair, n)
    return verdict.holds, f"exhaustive subsets at n={n}"


def check_sandwich_small(pair: SymmetricPair):
    d = float(pair.d_star) / 2
    dr = Fraction(pair.d_star, 2)
    consts = ldbounds.sandwich_constants(pair, d)
    n0 = consts.n0
    acc = exactdist.SpectrumAccumulator(pair)
    bad = 0
    for n in range(n0, n0 + 24):
        acc.advance_to(n)
        count = acc.ball_count(dr)
        logp = math.log(count) - n * math.log(pair.alphabet_size)
        sb = ldbounds.sandwich(pair, n, d)
        if not (sb.log_lower <= logp <= sb.log_upper):
            bad += 1
    return bad == 0, f"n0={n0}, violations={bad} over 24 blocklengths"


def check_gibbs_small(pair: SymmetricPair):
    d = float(pair.d_star) / 2
    dr = Fraction(pair.d_star, 2)
    consts = ldbounds.sandwich_constants(pair, d)
    bad = 0
    for n in range(consts.n0, consts.n0 + 12):
        mean = exactdist.conditional_tail_mean(pair, n, -dr)
        if not mean <= -dr + Fraction(consts.c_star).limit_denominator(10**12) / n:
            bad += 1
    return bad == 0, f"violations={bad} over 12 blocklengths"


def check_code_roundtrips(pair: SymmetricPair):
    for i in list(range(1, 130)) + [1023, 65537]:
        for m in (1, 2, 3, 5, 8):
            if codec.golomb_decode(codec.golomb_encode(i, m), m) != i:
                return False, f"golomb roundtrip failed at i={i}, m={m}"
        if codec.elias_delta_decode(codec.elias_delta_encode(i)) != i:
            return False, f"delta roundtrip failed at i={i}"
    return True, "golomb and delta invert exactly"


def check_expected_length_sandwich(pair: SymmetricPair):
    n = 12
    d = Fraction(pair.d_star, 2)
    dist = codec.index_distribution(pair, n, d)
    e_g = codec.golomb_expected_bits(dist.p, dist.golomb_m) * math.log(2)
    ok = dist.entropy_nats <= e_g <= dist.entropy_nats + math.log(2)
    return ok, f"H={dist.entropy_nats:.4f} <= E={e_g:.4f} <= H+log2"


def check_semifaithful(pair: SymmetricPair):
    n = 24
    d = Fraction(pair.d_star, 2)
    ok, max_d = semifaithful_roundtrips(pair, n, d, 200, 0xC0DE)
    return ok and max_d <= d, f"200 roundtrips, max distortion {max_d}"


def check_index_mean(pair: SymmetricPair):
    n = 10
    d = Fraction(pair.d_star, 2)
    dist = codec.index_distribution(pair, n, d)
    idx = geometric_index_samples(pair, n, d, [0] * n, 4000, 0xBEEF)
    want = dist.expected_index
    got = float(np.mean(idx))
    tol = 4.0 * math.sqrt((1 - float(dist.p))) * want / math.sqrt(4000)
    return abs(got - want) <= tol, f"mean index {got:.2f} vs {want:.2f} (tol {tol:.2f})"


def check_converse_consistency(pair: SymmetricPair):
    d = float(pair.d_star) / 2
    dr = Fraction(pair.d_star, 2)
    cfg = converse_config(pair, d)
    for n in (32, 64, 128):
        ach = codec.expected_length_exact(pair, n, dr, "golomb") / n
        bound = finite_n_lower_bound(pair, d, n, cfg)
        if bound.lower_rate_nats > ach:
            return False, f"converse above achievable at n={n}"
    return True, "converse below achievable rate"


CHECKS: list[tuple[str, Callable]] = [
    ("model: row/column multiset symmetry", check_symmetry_multisets),
    ("model: tilted channel marginal uniform", check_channel_marginal_uniform),
    ("model: tilted mean strictly decreasing", check_tilted_mean_monotone),
    ("model: tilted mean vanishes at large tilt", check_tilted_mean_vanishes),
    ("model: tilted variance floor", check_tilted_variance_floor),
    ("rdsolve: closed form = rate function = BA", check_rd_identities),
    ("rdsolve: convexity of the curve", check_rd_convexity),
    ("rdsolve: slope matches finite differences", check_rd_slope),
    ("rdsolve: curvature gap positive", check_curvature),
    ("exactdist: spectrum mass is exactly 1", check_spectrum_total),
    ("exactdist: ball probability monotone", check_ball_monotone),
    ("exactdist: conditional mean above threshold", check_conditional_mean_threshold),
    ("exactdist: ball-is-smallest oracle", check_ball_smallest),
    ("ldbounds: sandwich brackets exact ball prob", check_sandwich_small),
    ("ldbounds: conditional-mean constant", check_gibbs_small),
    ("codec: prefix code roundtrips", check_code_roundtrips),
    ("codec: expected length entropy sandwich", check_expected_length_sandwich),
    ("codec: d-semifaithful roundtrips", check_semifaithful),
    ("codec: geometric index mean", check_index_mean),
    ("converse: never crosses achievability", check_converse_consistency),
]


def verify_all(pair: SymmetricPair) -> list[CheckResult]:
    results = []
    for name, fn in CHECKS:
        try:
            passed, detail = fn(pair)
        except SymrdError as exc:
            passed, detail = False, f"{type(exc).__name__}: {exc}"
        results.append(CheckResult(name=name, passed=bool(passed), detail=detail))
    return results
