"""Acceptance gate: one test per criterion, one printed line per criterion.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines as they
complete.  Every tolerance is pinned here; the heavy per-blocklength
quantities come from the session-scoped exact sweep in conftest.
"""

import math
import time
from fractions import Fraction

import numpy as np
import pytest
from scipy import stats

from symrd import codec
from symrd.converse import converse_config, finite_n_lower_bound
from symrd.errors import SegmentNotLinear
from symrd.exactdist import ball_smallest_oracle
from symrd.experiments import (
    find_linear_segment,
    geometric_index_samples,
    semifaithful_roundtrips,
    straightline_demo,
)
from symrd.ldbounds import rate_function, sandwich_constants
from symrd.model import binary_hamming, ternary_hamming
from symrd.rdsolve import blahut_arimoto_pair, rate_distortion

F = Fraction
LN2 = math.log(2.0)

D_MAIN = F(1, 4)
SANDWICH_DS = (F(1, 10), F(1, 4), F(2, 5))
DOUBLING = (512, 1024, 2048, 4096)


def _report(name: str, ok: bool, detail: str, t0: float) -> None:
    mark = "PASS" if ok else "FAIL"
    print(f"[{mark}] {name}: {detail} ({time.time() - t0:.1f}s)", flush=True)


def test_a01_rate_identity_and_oracle():
    """Legendre value equals the curve value; both match the iterative solver."""
    t0 = time.time()
    worst_id = 0.0
    worst_ba = 0.0
    for pair in (binary_hamming(), ternary_hamming()):
        d_star = float(pair.d_star)
        for i in range(1, 21):
            d = d_star * i / 21
            pt = rate_distortion(pair, d)
            ev = rate_function(pair, d)
            worst_id = max(worst_id, abs(ev.rate - pt.rate))
            ba = blahut_arimoto_pair(pair, pt.slope)
            worst_ba = max(worst_ba, abs(ba.rate - pt.rate), abs(ba.distortion - d))
    ok = worst_id <= 1e-10 and worst_ba <= 1e-7
    _report(
        "A1 rate identity",
        ok,
        f"max |Legendre-curve|={worst_id:.2e} (tol 1e-10), max |BA-curve|={worst_ba:.2e} (tol 1e-7)",
        t0,
    )
    assert worst_id <= 1e-10
    assert worst_ba <= 1e-7


def test_a02_binary_closed_form():
    """Binary Hamming curve equals log 2 - h(D) to 1e-12 on the grid."""
    t0 = time.time()
    pair = binary_hamming()
    worst = 0.0
    for i in range(1, 21):
        d = 0.5 * i / 21
        closed = LN2 + d * math.log(d) + (1 - d) * math.log(1 - d)
        worst = max(worst, abs(rate_distortion(pair, d).rate - closed))
    ok = worst <= 1e-12
    _report("A2 closed form", ok, f"max deviation {worst:.2e} (tol 1e-12)", t0)
    assert ok


def test_a03_ball_sandwich(binary, binary_sweep):
    """Exact ball probability sits inside the two-sided bound for every n."""
    t0 = time.time()
    total = 0
    violations = 0
    details = []
    for d in SANDWICH_DS:
        consts = sandwich_constants(binary, float(d))
        ev = rate_function(binary, float(d))
        log_p = {
            F(1, 10): binary_sweep.log_p_low,
            F(1, 4): binary_sweep.log_p_main,
            F(2, 5): binary_sweep.log_p_high,
        }[d]
        for n in range(consts.n0, 2049):
            base = -0.5 * math.log(n) - n * ev.rate
            lo = math.log(consts.m_lower) + base
            hi = math.log(consts.m_upper) + base
            total += 1
            if not (lo <= log_p[n] <= hi):
                violations += 1
        details.append(f"D={d}: n0={consts.n0}")
    ok = violations == 0
    _report(
        "A3 ball sandwich",
        ok,
        f"{violations} violations over {total} (n, D) cells [{'; '.join(details)}]",
        t0,
    )
    assert ok


def test_a04_gibbs_conditioning(binary, binary_sweep):
    """Exact conditional tail mean obeys the -D + C*/n bound for every n."""
    t0 = time.time()
    consts = sandwich_constants(binary, 0.25)
    c_star = Fraction(consts.c_star)
    violations = 0
    total = 0
    for n in range(consts.n0, 513):
        total += 1
        if not binary_sweep.cond_mean_main[n] <= F(-1, 4) + c_star / n:
            violations += 1
    ok = violations == 0 and total > 0
    _report(
        "A4 conditional-mean bound",
        ok,
        f"{violations} violations over n in [{consts.n0}, 512], C*={consts.c_star:.1f}",
        t0,
    )
    assert ok


def test_a05_ball_is_smallest():
    """Exhaustive oracle: balls maximize probability at fixed mean distortion."""
    t0 = time.time()
    v1 = ball_smallest_oracle(binary_hamming(), 3)
    v2 = ball_smallest_oracle(ternary_hamming(), 2)
    ok = v1.holds and v2.holds
    _report(
        "A5 ball-is-smallest oracle",
        ok,
        "binary n=3 (255 subsets) and ternary n=2 (511 subsets) hold",
        t0,
    )
    assert ok


def test_a06_achievability_bound(binary, binary_sweep):
    """Exact Golomb rate meets R + log n/(2n) + C0/n; normalized redundancy
    stays below 1/2 + 3/log n and decreases along the doubling grid."""
    t0 = time.time()
    consts = sandwich_constants(binary, 0.25)
    rate = rate_distortion(binary, 0.25).rate
    c0 = 1.0 + 1.0 + LN2 - math.log(consts.m_lower)
    n0 = consts.n0
    bound_viol = 0
    norm_viol = 0
    for n in range(n0, 4097):
        e_g = binary_sweep.e_golomb_nats[n]
        if e_g > n * rate + 0.5 * math.log(n) + c0:
            bound_viol += 1
        norm = (e_g / n - rate) * n / math.log(n)
        if norm > 0.5 + 3.0 / math.log(n):
            norm_viol += 1
    series = [
        (binary_sweep.e_golomb_nats[n] / n - rate) * n / math.log(n) for n in DOUBLING
    ]
    decreasing = all(a > b for a, b in zip(series, series[1:]))
    ok = bound_viol == 0 and norm_viol == 0 and decreasing
    _report(
        "A6 achievability",
        ok,
        f"C0={c0:.3f}; bound viol={bound_viol}, norm viol={norm_viol} over n in "
        f"[{n0}, 4096]; doubling-grid redundancy {['%.4f' % s for s in series]} decreasing={decreasing}",
        t0,
    )
    assert ok


def test_a07_semifaithful_roundtrips(binary):
    """10^5 encode/decode roundtrips at n=64, D=1/4: distortion never exceeds
    D and decode always reproduces the encoder's codeword."""
    t0 = time.time()
    ok, max_d = semifaithful_roundtrips(
        binary, 64, D_MAIN, 100_000, master_seed=0x5EED7, num_codebooks=16
    )
    good = ok and max_d <= D_MAIN
    _report(
        "A7 d-semifaithful roundtrips",
        good,
        f"100000 roundtrips across 16 codebooks, max distortion {max_d} <= 1/4",
        t0,
    )
    assert good


def _geometric_bins(p: float, trials: int):
    """Bin edges 1..K plus a tail bin, all with expected count >= 5."""
    k = 1
    while trials * p * (1 - p) ** (k - 1) >= 5:
        k += 1
    k = max(2, k - 1)
    expected = [trials * p * (1 - p) ** (j - 1) for j in range(1, k + 1)]
    expected.append(trials * (1 - p) ** k)
    return k, np.asarray(expected)


def _bin_counts(idx: np.ndarray, k: int):
    clipped = np.minimum(idx, k + 1)
    return np.bincount(clipped, minlength=k + 2)[1:]


def test_a08_index_law(binary):
    """Accepted index is geometric with the exact ball probability, for two
    fixed source blocks, and its law does not depend on the block."""
    t0 = time.time()
    n = 16
    trials = 100_000
    dist = codec.index_distribution(binary, n, D_MAIN)
    p = float(dist.p)
    xa = [0] * n
    xb = [0, 1] * (n // 2)
    idx_a = geometric_index_samples(binary, n, D_MAIN, xa, trials, master_seed=101)
    idx_b = geometric_index_samples(binary, n, D_MAIN, xb, trials, master_seed=202)

    k, expected = _geometric_bins(p, trials)
    obs_a = _bin_counts(idx_a, k)
    obs_b = _bin_counts(idx_b, k)
    chi_a = float(((obs_a - expected) ** 2 / expected).sum())
    chi_b = float(((obs_b - expected) ** 2 / expected).sum())
    p_a = float(stats.chi2.sf(chi_a, k))
    p_b = float(stats.chi2.sf(chi_b, k))
    _, p_two, _, _ = stats.chi2_contingency(np.vstack([obs_a, obs_b]))
    ok = p_a >= 0.01 and p_b >= 0.01 and p_two >= 0.01
    _report(
        "A8 index law",
        ok,
        f"GOF p-values {p_a:.3f}/{p_b:.3f}, two-sample p={p_two:.3f} "
        f"(all must be >= 0.01; exact p={p:.6f}, {k + 1} bins)",
        t0,
    )
    assert ok


def test_a09_converse_pinch(binary, binary_sweep):
    """Lower bound never crosses the achievable rate, and both gaps to
    R + log n/(2n), scaled by n, stay below blocklength-free constants."""
    t0 = time.time()
    consts = sandwich_constants(binary, 0.25)
    cfg = converse_config(binary, 0.25)
    rate = rate_distortion(binary, 0.25).rate
    c0 = 1.0 + 1.0 + LN2 - math.log(consts.m_lower)
    c_conv = cfg.residual_numerator
    cross = 0
    ach_gap_viol = 0
    conv_gap_viol = 0
    for n in range(consts.n0, 4097):
        ach = binary_sweep.e_golomb_nats[n] / n
        bound = finite_n_lower_bound(binary, 0.25, n, cfg)
        if bound.lower_rate_nats > ach:
            cross += 1
        if binary_sweep.e_golomb_nats[n] - n * rate - 0.5 * math.log(n) > c0:
            ach_gap_viol += 1
        if n * (rate + math.log(n) / (2 * n) - bound.lower_rate_nats) > c_conv:
            conv_gap_viol += 1
    ok = cross == 0 and ach_gap_viol == 0 and conv_gap_viol == 0
    _report(
        "A9 converse pinch",
        ok,
        f"crossings={cross}; achievable-gap constant {c0:.3f} viol={ach_gap_viol}; "
        f"converse-gap constant {c_conv:.3e} viol={conv_gap_viol} (n in [{consts.n0}, 4096])",
        t0,
    )
    assert ok


def test_a10_baseline_separation(binary, binary_sweep):
    """Elias-delta baseline is worse than Golomb at every grid blocklength,
    and its normalized redundancy at n=4096 falls in [0.8, 1.3]."""
    t0 = time.time()
    rate = rate_distortion(binary, 0.25).rate
    grid = [n for n in (64, 128, 256, 512, 1024, 2048, 4096)]
    sep_ok = True
    for n in grid:
        e_e = binary_sweep.e_elias_nats[n]
        e_g = binary_sweep.e_golomb_nats[n]
        if (e_e / n - rate) <= (e_g / n - rate):
            sep_ok = False
    elias_norm = (binary_sweep.e_elias_nats[4096] / 4096 - rate) * 4096 / math.log(4096)
    window_ok = 0.8 <= elias_norm <= 1.3
    ok = sep_ok and window_ok
    _report(
        "A10 baseline separation",
        ok,
        f"Elias > Golomb at every grid n: {sep_ok}; Elias normalized redundancy "
        f"at n=4096 is {elias_norm:.4f}, required window [0.8, 1.3]: {window_ok}",
        t0,
    )
    assert sep_ok
    # The window check fails by construction of the delta code: the index is
    # geometric with log2(I) concentrated near log2(1/p) = Theta(n), so the
    # delta code's 2*floor(log2(floor(log2 I)+1)) header term contributes
    # Theta(log n) extra bits, not a lower-order term, and the normalized
    # redundancy converges to 5/2 rather than 1.  See the decisions ledger.
    assert window_ok, (
        f"Elias normalized redundancy {elias_norm:.4f} cannot fall in [0.8, 1.3]: "
        "the delta header adds ~2 log(n)/n nats on top of the half-log term"
    )


def test_a11_straightline_demo(straightline_scheme):
    """Flag scheme on the certified linear-segment instance beats the
    symmetric half-log floor; the scan rejects the strictly curved control."""
    t0 = time.time()
    rep = straightline_demo(straightline_scheme, 4096, 100_000, master_seed=0xF1A6)
    threshold = (1.0 - float(rep.theta)) + 0.15
    dist_ok = rep.distortion_ok
    red_ok = rep.measured_norm_redundancy <= threshold
    try:
        find_linear_segment([0.5, 0.5], [[F(0), F(1)], [F(1), F(0)]])
        control_ok = False
    except SegmentNotLinear:
        control_ok = True
    ok = dist_ok and red_ok and control_ok
    _report(
        "A11 straight-line demo",
        ok,
        f"theta={rep.theta}: measured normalized redundancy "
        f"{rep.measured_norm_redundancy:.4f} <= {threshold:.4f}; exact "
        f"{rep.exact_norm_redundancy:.4f}; expected distortion {float(rep.expected_distortion):.6f} "
        f"<= {float(rep.d_target):.6f}; curved control rejected={control_ok}",
        t0,
    )
    assert ok
