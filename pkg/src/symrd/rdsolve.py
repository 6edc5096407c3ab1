"""Rate-distortion curve, tilting-parameter root finder, Blahut-Arimoto.

For a symmetric pair the curve has the closed parametric form

    R(D) = -lambda* D - log( mean_y exp(-lambda* d(x, y)) ),

where ``lambda*`` is the unique tilt whose tilted mean distortion equals
``D``.  The slope is ``-lambda*``.  ``blahut_arimoto`` is the independent
oracle: a generic alternating-minimization solver over arbitrary finite
sources and distortion matrices (it also powers the straight-line demo,
where the pair is not symmetric).

Rates are natural-log throughout; convert to bits at the reporting layer.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.special import logsumexp

from .errors import NonConvergence, NotCurved, OutOfRange
from .model import LAMBDA_CAP, SymmetricPair, tilted_mean

# Memoization granularity for distortion keys.
_KEY_SCALE = 10**12


@dataclass(frozen=True)
class RDPoint:
    d: float
    lambda_star: float
    rate: float
    slope: float


@dataclass(frozen=True)
class CurvatureCertificate:
    d: float
    d1: float
    d2: float
    gap: float  # min tangent-line excess at the flanking points


@dataclass(frozen=True)
class BAPoint:
    distortion: float
    rate: float
    gap: float
    iterations: int
    output_pmf: tuple[float, ...]


_rd_cache: dict[tuple[SymmetricPair, int], RDPoint] = {}
_rd_cache_lock = threading.Lock()


def _check_distortion(pair: SymmetricPair, d: float) -> float:
    d = float(d)
    if not (0.0 < d < float(pair.d_star)):
        raise OutOfRange(
            f"distortion {d} outside (0, {float(pair.d_star)}) for pair {pair.name!r}"
        )
    return d


def solve_lambda_star(pair: SymmetricPair, d, *, max_iter: int = 200) -> float:
    """Tilt whose tilted mean distortion equals ``d``, by bisection.

    The tilted mean is strictly decreasing in the tilt, so bisection on
    [0, LAMBDA_CAP] is guaranteed; stops once the mean matches ``d`` to a
    relative 1e-12.
    """
    d = _check_distortion(pair, d)
    lo, hi = 0.0, 1.0
    while tilted_mean(pair, hi) > d:
        hi *= 2.0
        if hi >= LAMBDA_CAP:
            hi = LAMBDA_CAP
            break
    tol = 1e-12 * d
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        m = tilted_mean(pair, mid)
        if abs(m - d) <= tol:
            return mid
        if m > d:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def cumulant(pair: SymmetricPair, lam: float) -> float:
    """Per-letter log moment generating value log E[exp(-lam d(X, y))].

    Independent of the conditioning symbol by permutation symmetry.
    """
    if lam < 0 or not math.isfinite(lam):
        raise OutOfRange(f"tilt must be finite and nonnegative, got {lam!r}")
    k = pair.alphabet_size
    total = sum(math.exp(-lam * v) for v in pair.letter_floats)
    return math.log(total / k)


def rate_distortion(pair: SymmetricPair, d) -> RDPoint:
    """Rate (nats) and slope of the curve at distortion ``d``; memoized."""
    d = _check_distortion(pair, d)
    key = (pair, round(d * _KEY_SCALE))
    with _rd_cache_lock:
        hit = _rd_cache.get(key)
    if hit is not None:
        return hit
    lam = solve_lambda_star(pair, d)
    rate = -lam * d - cumulant(pair, lam)
    point = RDPoint(d=d, lambda_star=lam, rate=max(rate, 0.0), slope=-lam)
    with _rd_cache_lock:
        _rd_cache[key] = point
    return point


def blahut_arimoto(
    source_pmf: Sequence[float],
    matrix: Sequence[Sequence[float]],
    slope: float,
    *,
    iters: int = 200_000,
    tol: float = 1e-11,
    log_q0: Optional[np.ndarray] = None,
) -> BAPoint:
    """One parametric point of the rate-distortion curve at a fixed slope.

    Alternates the conditional-law and output-marginal updates in the log
    domain.  The reported ``gap`` bounds the suboptimality of the dual
    value at the current marginal: ``gap = max_y t(y) - 1`` where
    ``t(y) = sum_x p(x) exp(slope d(x,y)) / c(x)`` and
    ``c(x) = sum_y q(y) exp(slope d(x,y))``.  Convexity of the dual gives
    ``V(q) - V* <= log(1 + gap) <= gap``.

    Raises NonConvergence if the gap is still above ``tol`` after ``iters``
    updates.  Works for arbitrary finite pmfs and rectangular matrices.
    """
    if slope >= 0:
        raise OutOfRange(f"slope must be negative, got {slope}")
    p_x = np.asarray(source_pmf, dtype=float)
    if p_x.ndim != 1 or np.any(p_x < 0) or p_x.sum() <= 0:
        raise OutOfRange("source pmf must be a nonnegative vector with positive mass")
    p_x = p_x / p_x.sum()
    dmat = np.asarray(matrix, dtype=float)
    if dmat.shape[0] != p_x.shape[0]:
        raise OutOfRange("matrix row count must match source pmf length")

    log_px = np.log(np.where(p_x > 0, p_x, 1.0))
    scaled = slope * dmat
    if log_q0 is None:
        log_q = np.full(dmat.shape[1], -math.log(dmat.shape[1]))
    else:
        log_q = np.asarray(log_q0, dtype=float).copy()

    gap = math.inf
    it = 0
    log_w = scaled + log_q
    for it in range(1, iters + 1):
        log_w = scaled + log_q
        log_w -= logsumexp(log_w, axis=1, keepdims=True)
        # the gap evaluation costs as much as the update itself, so check on
        # a sparse schedule (every iteration early on, then every 16th)
        if it <= 8 or it % 16 == 0 or it == iters:
            log_c = logsumexp(log_q[None, :] + scaled, axis=1)
            log_t = logsumexp(log_px[:, None] + scaled - log_c[:, None], axis=0)
            gap = math.expm1(float(log_t.max()))
            if gap <= tol:
                break
        log_q = logsumexp(log_px[:, None] + log_w, axis=0)
    if gap > tol:
        raise NonConvergence(
            f"duality gap {gap:.3e} above tol {tol:.1e} after {it} iterations"
        )

    w = np.exp(log_w)
    dist = float(np.sum(p_x[:, None] * w * dmat))
    # rate against the induced marginal: a genuine mutual information, so
    # (dist, rate) always lies on or above the curve
    log_q_ind = logsumexp(log_px[:, None] + log_w, axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        contrib = np.where(w > 0, w * (log_w - log_q_ind[None, :]), 0.0)
    rate = float(np.sum(p_x[:, None] * contrib))
    q_out = np.exp(log_q_ind)
    return BAPoint(
        distortion=dist,
        rate=max(rate, 0.0),
        gap=gap,
        iterations=it,
        output_pmf=tuple(q_out / q_out.sum()),
    )


def blahut_arimoto_pair(pair: SymmetricPair, slope: float, **kw) -> BAPoint:
    """Convenience wrapper: uniform source over the pair's own matrix."""
    k = pair.alphabet_size
    matrix = [[float(v) for v in row] for row in pair.matrix.entries]
    return blahut_arimoto([1.0 / k] * k, matrix, slope, **kw)


def blahut_arimoto_at_distortion(
    source_pmf: Sequence[float],
    matrix: Sequence[Sequence[float]],
    d_target: float,
    *,
    slope_lo: float = -80.0,
    slope_hi: float = -1e-9,
    d_tol: float = 1e-9,
    bisect_iters: int = 100,
    **kw,
) -> BAPoint:
    """Hit a target distortion by outer bisection on the slope.

    The parametric distortion is nondecreasing in the slope, so bisection
    converges on strictly convex stretches of the curve.  On a linear
    segment the parametric solution jumps across the target; the closest
    endpoint reached is returned (segments themselves are certified by the
    dedicated slope scan, not by this helper).
    """
    lo, hi = slope_lo, slope_hi
    best: Optional[BAPoint] = None
    for _ in range(bisect_iters):
        mid = 0.5 * (lo + hi)
        pt = blahut_arimoto(source_pmf, matrix, mid, **kw)
        if best is None or abs(pt.distortion - d_target) < abs(best.distortion - d_target):
            best = pt
        if abs(pt.distortion - d_target) <= d_tol:
            return pt
        if pt.distortion > d_target:
            hi = mid
        else:
            lo = mid
    return best


def default_flanks(pair: SymmetricPair, d: float) -> tuple[float, float]:
    """Flanking distortions used by the curvature machinery: midpoints of
    (0, d) and (d, d_star)."""
    d_star = float(pair.d_star)
    return d / 2.0, (d + d_star) / 2.0


def curvature_certificate(
    pair: SymmetricPair, d, d1: Optional[float] = None, d2: Optional[float] = None
) -> CurvatureCertificate:
    """Positive gap between the curve and its tangent at two flanking points.

    The gap H certifies strict local convexity about ``d``; symmetric pairs
    always produce H > 0, so NotCurved indicates a bug or an invalid pair.
    """
    d = _check_distortion(pair, d)
    dd1, dd2 = default_flanks(pair, d)
    d1 = dd1 if d1 is None else float(d1)
    d2 = dd2 if d2 is None else float(d2)
    if not (0.0 < d1 < d < d2 < float(pair.d_star)):
        raise OutOfRange(
            f"need 0 < D1 < D < D2 < D*; got D1={d1}, D={d}, D2={d2}"
        )
    at = rate_distortion(pair, d)
    gaps = []
    for di in (d1, d2):
        ri = rate_distortion(pair, di).rate
        gaps.append(ri - at.rate - at.slope * (di - d))
    gap = min(gaps)
    if gap <= 0:
        raise NotCurved(f"curvature gap {gap} is not positive at D={d}")
    return CurvatureCertificate(d=d, d1=d1, d2=d2, gap=gap)


def supporting_line_gap(
    pair: SymmetricPair,
    d,
    d_hat: float,
    certificate: Optional[CurvatureCertificate] = None,
) -> float:
    """Excess of the curve over the tangent at ``d``, evaluated at ``d_hat``.

    ``d_hat`` must lie outside [D1, D2]; the excess is then at least the
    curvature gap of the certificate.
    """
    d = _check_distortion(pair, d)
    cert = certificate or curvature_certificate(pair, d)
    d_star = float(pair.d_star)
    d_hat = float(d_hat)
    inside = cert.d1 < d_hat < cert.d2  # the flanks themselves attain the gap
    if inside or not (0.0 < d_hat <= d_star):
        raise OutOfRange(
            f"D_hat must lie in (0, {cert.d1}] or [{cert.d2}, {d_star}], got {d_hat}"
        )
    at = rate_distortion(pair, d)
    r_hat = 0.0 if d_hat >= d_star else rate_distortion(pair, d_hat).rate
    return r_hat - at.rate - at.slope * (d_hat - d)


def rd_grid(pair: SymmetricPair, points: int) -> list[RDPoint]:
    """Evenly spaced interior grid of curve points, for reports."""
    d_star = float(pair.d_star)
    return [
        rate_distortion(pair, d_star * i / (points + 1)) for i in range(1, points + 1)
    ]
