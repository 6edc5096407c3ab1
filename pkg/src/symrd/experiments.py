"""Experiment drivers: redundancy sweeps, index-law sampling, straight-line demo.

Headline rates in these reports are exact series values; Monte Carlo is
used only to certify the almost-sure distortion guarantee and the
distributional claims (geometric index law, branch frequencies), so the
redundancy curves carry no sampling noise.

Reproducibility: every trial t derives its own seed ``mix64(master ^ t)``;
identical master seeds give byte-identical reports.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Sequence

import numpy as np

from . import codec
from .codec import (
    PackedBinaryCodebook,
    elias_delta_expected_bits,
    elias_delta_length,
    golomb_expected_bits,
    golomb_parameter,
    mix64,
)
from .converse import ConverseConfig, converse_config, finite_n_lower_bound
from .errors import OutOfRange, QuantileDegenerate, SegmentNotLinear
from .exactdist import SpectrumAccumulator, _as_rational
from .model import SymmetricPair
from .rdsolve import BAPoint, blahut_arimoto, rate_distortion

LN2 = math.log(2.0)


def derived_seed(master: int, t: int) -> int:
    return mix64((master ^ t) & ((1 << 64) - 1))


# -- redundancy sweep ---------------------------------------------------------


@dataclass(frozen=True)
class SweepRow:
    n: int
    p: float  # float image of the exact acceptance probability
    log_p_nats: float
    index_entropy_nats: float
    e_len_golomb_nats: float
    e_len_elias_nats: float
    rate_nats: float
    norm_red_golomb: float
    norm_red_elias: float
    converse_lower_nats: float
    converse_trivial: bool
    mc_trials: int
    mc_max_distortion: Optional[float]  # None when no trials ran at this n


@dataclass(frozen=True)
class SweepReport:
    pair_name: str
    d: Fraction
    master_seed: int
    rows: tuple[SweepRow, ...]

    CSV_FIELDS = (
        "n",
        "p",
        "log_p_nats",
        "index_entropy_nats",
        "e_len_golomb_nats",
        "e_len_elias_nats",
        "rate_nats",
        "norm_red_golomb",
        "norm_red_elias",
        "converse_lower_nats",
        "converse_trivial",
        "mc_trials",
        "mc_max_distortion",
    )

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(",".join(self.CSV_FIELDS) + "\n")
        for r in self.rows:
            vals = [getattr(r, f) for f in self.CSV_FIELDS]
            buf.write(",".join("" if v is None else repr(v) if isinstance(v, float) else str(v) for v in vals) + "\n")
        return buf.getvalue()


def _float_from_log(log_value: float) -> float:
    try:
        return math.exp(log_value)
    except OverflowError:
        return 0.0 if log_value < 0 else math.inf


def redundancy_sweep(
    pair: SymmetricPair,
    d,
    n_grid: Sequence[int],
    *,
    trials: int = 0,
    master_seed: int = 0x5EED,
    mc_mean_index_cap: float = 1e6,
    config: Optional[ConverseConfig] = None,
    threads: int = 1,
) -> SweepReport:
    """Exact per-blocklength redundancy table, plus optional roundtrip trials.

    Monte Carlo roundtrips only run at blocklengths where the expected
    codebook search (1/p candidate words) stays below
    ``mc_mean_index_cap``; beyond that the scheme is still analyzed
    exactly but simulating it is out of reach by construction.  With
    ``threads > 1`` the roundtrip passes for different blocklengths run in
    a thread pool (rows merge in blocklength order either way).
    """
    d = _as_rational(d)
    grid = sorted(set(int(n) for n in n_grid))
    if grid[0] < 1:
        raise OutOfRange("blocklengths must be positive")
    config = config or converse_config(pair, float(d))
    acc = SpectrumAccumulator(pair)
    exact_rows = []
    mc_jobs = []
    for n in grid:
        acc.advance_to(n)
        count = acc.ball_count(d)
        if count == 0:
            raise OutOfRange(f"ball probability vanishes at n={n}")
        p = Fraction(count, acc.total)
        log_p = math.log(count) - n * math.log(pair.alphabet_size)
        m = golomb_parameter(p)
        e_g = golomb_expected_bits(p, m) * LN2
        e_e = elias_delta_expected_bits(p) * LN2
        point = rate_distortion(pair, float(d))
        h_index = _geometric_entropy_nats(p)
        bound = finite_n_lower_bound(pair, float(d), n, config)
        exact_rows.append((n, log_p, h_index, e_g, e_e, point.rate, bound))
        if trials > 0 and float(p) > 0 and 1.0 / float(p) <= mc_mean_index_cap:
            mc_jobs.append(n)

    mc_results: dict[int, float] = {}
    if mc_jobs:
        def run(n):
            return n, _roundtrip_max_distortion(
                pair, n, d, trials, derived_seed(master_seed, n)
            )

        if threads > 1:
            from concurrent.futures import ThreadPoolExecutor

            with ThreadPoolExecutor(max_workers=threads) as pool:
                for n, val in pool.map(run, mc_jobs):
                    mc_results[n] = val
        else:
            for n in mc_jobs:
                mc_results[n] = run(n)[1]

    rows = []
    for n, log_p, h_index, e_g, e_e, rate, bound in exact_rows:
        log_n = math.log(n)
        rows.append(
            SweepRow(
                n=n,
                p=_float_from_log(log_p),
                log_p_nats=log_p,
                index_entropy_nats=h_index,
                e_len_golomb_nats=e_g,
                e_len_elias_nats=e_e,
                rate_nats=rate,
                norm_red_golomb=(e_g / n - rate) * n / log_n,
                norm_red_elias=(e_e / n - rate) * n / log_n,
                converse_lower_nats=bound.lower_rate_nats,
                converse_trivial=bound.trivial,
                mc_trials=trials if n in mc_results else 0,
                mc_max_distortion=mc_results.get(n),
            )
        )
    return SweepReport(
        pair_name=pair.name, d=d, master_seed=master_seed, rows=tuple(rows)
    )


def _geometric_entropy_nats(p: Fraction) -> float:
    import mpmath as mp

    if p == 1:
        return 0.0
    with mp.workdps(80):
        pm = mp.mpf(p.numerator) / mp.mpf(p.denominator)
        return float(-(pm * mp.log(pm) + (1 - pm) * mp.log1p(-pm)) / pm)


def _roundtrip_max_distortion(pair, n, d, trials, seed) -> float:
    """Run encode/decode roundtrips; returns the largest observed distortion."""
    ok, max_dist = semifaithful_roundtrips(pair, n, d, trials, seed)
    if not ok:
        raise AssertionError("roundtrip produced a distortion violation or decode mismatch")
    return float(max_dist)


# -- Monte Carlo harnesses ----------------------------------------------------


def semifaithful_roundtrips(
    pair: SymmetricPair,
    n: int,
    d,
    trials: int,
    master_seed: int,
    *,
    num_codebooks: int = 16,
    capacity: Optional[int] = None,
) -> tuple[bool, Fraction]:
    """Encode/decode ``trials`` uniform source blocks; verify the guarantee.

    The trials are split across ``num_codebooks`` shared-randomness
    realizations; within one codebook the packed binary fast path makes the
    expected-geometric index search cheap.  Returns (all_ok, max_distortion)
    where all_ok requires every decode to reproduce the encoder's codeword
    and every distortion to pass the exact grid comparison.

    Only binary alphabets get the packed fast path; other pairs fall back
    to the streaming encoder (use small trial counts there).
    """
    d = _as_rational(d)
    threshold = math.floor(n * pair.q * d)
    dist_info = codec.index_distribution(pair, n, d)
    p_float = _float_from_log(dist_info.log_p())
    if capacity is None:
        # large enough that a miss is a ~e^-40 event
        capacity = int(min(1 << 22, max(1 << 12, 40.0 / max(p_float, 1e-18))))

    rng_master = np.random.default_rng(master_seed)
    per_book = [trials // num_codebooks] * num_codebooks
    for i in range(trials % num_codebooks):
        per_book[i] += 1

    max_t = 0
    # materializing a packed codebook only pays off when it is reused a lot
    if pair.alphabet_size == 2 and trials >= 512 * num_codebooks:
        v = pair.matrix.int_entries[0][1]
        mism_thr = threshold // v
        for b, t_count in enumerate(per_book):
            if t_count == 0:
                continue
            seed = derived_seed(master_seed, b)
            book = PackedBinaryCodebook(seed, n, capacity=capacity)
            xs = rng_master.integers(0, 2, size=(t_count, n), dtype=np.uint8)
            xw = _pack_rows(xs, book.words_per_row)
            for row in range(t_count):
                idx = book.search(xs[row], mism_thr, 1 << 32)
                if idx is None:
                    return False, Fraction(0)
                y = book.codeword(idx)
                yw = _pack_rows(np.asarray(y, dtype=np.uint8)[None, :], book.words_per_row)
                mism = int(np.bitwise_count(yw[0] ^ xw[row]).sum())
                if mism * v > threshold:
                    return False, Fraction(mism * v, n * pair.q)
                # decode from bits and compare
                m = dist_info.golomb_m
                bits = codec.golomb_encode(idx, m)
                y2 = codec.decode(
                    pair, codec.EncodedMessage(bits=bits, scheme="golomb"), n, d, seed
                )
                if y2 != y:
                    return False, Fraction(0)
                max_t = max(max_t, mism * v)
        return True, Fraction(max_t, n * pair.q)

    # generic fallback: streaming encoder per trial
    for t in range(trials):
        seed = derived_seed(master_seed, t % num_codebooks)
        x = rng_master.integers(0, pair.alphabet_size, size=n)
        msg, y = codec.encode(pair, x, d, seed)
        y2 = codec.decode(pair, msg, n, d, seed)
        if y2 != y:
            return False, Fraction(0)
        ints = pair.matrix.int_entries
        tot = sum(ints[a][b2] for a, b2 in zip(x, y))
        if tot > threshold:
            return False, Fraction(tot, n * pair.q)
        max_t = max(max_t, tot)
    return True, Fraction(max_t, n * pair.q)


def _pack_rows(rows: np.ndarray, words_per_row: int) -> np.ndarray:
    padded = np.zeros((rows.shape[0], words_per_row * 64), dtype=np.uint8)
    padded[:, : rows.shape[1]] = rows
    return np.packbits(padded, axis=1, bitorder="little").view(np.uint64)


def geometric_index_samples(
    pair: SymmetricPair,
    n: int,
    d,
    x: Sequence[int],
    trials: int,
    master_seed: int,
    *,
    first_batch: Optional[int] = None,
) -> np.ndarray:
    """Accepted index of a fixed source block over fresh codebook seeds.

    Each trial regenerates an independent codebook (seed mix64(master ^ t)),
    so the returned indexes are i.i.d. geometric with the exact ball
    probability as success rate.  Vectorized across trials in chunks; the
    rare trial whose index exceeds the first batch falls back to the
    streaming search.
    """
    d = _as_rational(d)
    x_arr = np.asarray(x, dtype=np.int64)
    if x_arr.size != n:
        raise OutOfRange("x length must equal n")
    threshold = math.floor(n * pair.q * d)
    dint = np.asarray(pair.matrix.int_entries, dtype=np.int64)
    k = pair.alphabet_size
    plain_hamming = pair.matrix.int_entries == tuple(
        tuple(0 if i == j else 1 for j in range(k)) for i in range(k)
    )

    seeds = np.array(
        [derived_seed(master_seed, t) for t in range(trials)], dtype=np.uint64
    )
    seed_mix = _mix64_np_local(seeds)
    out = np.zeros(trials, dtype=np.int64)
    t_vec = np.arange(1, n + 1, dtype=np.uint64)
    x_u16 = x_arr.astype(np.uint16)

    def resolve(pending: np.ndarray, start: int, size: int) -> np.ndarray:
        """Scan candidate indexes start+1 .. start+size for pending trials."""
        idx_vec = np.arange(start + 1, start + size + 1, dtype=np.uint64)
        chunk = max(1, (1 << 23) // (size * n))
        found = np.zeros(pending.size, dtype=np.int64)
        for lo in range(0, pending.size, chunk):
            hi = min(pending.size, lo + chunk)
            rows = pending[lo:hi]
            base = _mix64_np_local(seed_mix[rows][:, None] ^ idx_vec[None, :])
            w = _mix64_np_local(base[:, :, None] ^ t_vec[None, None, :])
            sym = codec._symbols_from_words(w.reshape(-1, n), k).reshape(w.shape)
            if plain_hamming:
                dist = (sym != x_u16[None, None, :]).sum(axis=2, dtype=np.int32)
            else:
                dist = dint[x_arr[None, None, :], sym.astype(np.int64)].sum(axis=2)
            hit = dist <= threshold
            any_hit = hit.any(axis=1)
            first = np.argmax(hit, axis=1) + 1 + start
            found[lo:hi] = np.where(any_hit, first, 0)
        return found

    stage = first_batch or 64
    start = 0
    pending = np.arange(trials)
    while pending.size and start < (1 << 22):
        found = resolve(pending, start, stage)
        out[pending] = np.where(found > 0, found, out[pending])
        pending = pending[found == 0]
        start += stage
        stage = min(stage * 16, 1 << 14)

    for t in pending:
        stream = codec.CodebookStream(int(seeds[t]), n, k)
        idx = codec._stream_search(
            stream,
            x_arr,
            threshold,
            1 << 32,
            dint=None if plain_hamming and k == 2 else dint,
            start_index=start + 1,
        )
        if idx is None:
            raise OutOfRange("index cap exceeded while sampling the index law")
        out[t] = idx
    return out


def _mix64_np_local(z: np.ndarray) -> np.ndarray:
    return codec._mix64_np(z)


# -- straight-line rate curve: scan and demo ----------------------------------


@dataclass(frozen=True)
class LinearSegment:
    """Certified affine stretch of a rate-distortion curve.

    The certificate is dual: at slope ``-beta0`` the face-restricted
    optimizer satisfies the full first-order conditions (kkt_gap ~ 0), so
    the supporting line at that slope touches the curve at ``d_lo``; the
    dropped reconstruction symbol's point mass is a second contact at
    ``d_hi`` (contact_gap ~ 0).  Convexity pins the curve to the line in
    between.
    """

    d_lo: float
    d_hi: float
    slope: float  # negative
    dual_value: float  # min over channels of rate + beta0 * distortion
    face: tuple[int, ...]
    dropped: tuple[int, ...]
    kkt_gap: float
    contact_gap: float
    face_output_pmf: tuple[float, ...]

    def rate_at(self, d: float) -> float:
        return self.dual_value + self.slope * d

    @property
    def beta0(self) -> float:
        return -self.slope


def _face_dual_stats(p_x, dmat, beta, face, ba_kw):
    point = blahut_arimoto(p_x, dmat[:, face], -beta, **ba_kw)
    q_face = np.asarray(point.output_pmf)
    c = (q_face[None, :] * np.exp(-beta * dmat[:, face])).sum(axis=1)
    t_all = (np.asarray(p_x)[:, None] * np.exp(-beta * dmat) / c[:, None]).sum(axis=0)
    return point, t_all


def find_linear_segment(
    source_pmf: Sequence[float],
    matrix,
    *,
    beta_lo: float = 0.02,
    beta_hi: float = 20.0,
    grid: int = 96,
    jump_threshold: float = 0.02,
    tol: float = 1e-9,
) -> LinearSegment:
    """Locate and certify a linear segment via a slope scan.

    A jump in the parametric distortion D(beta) flags a candidate; the
    certificate then (i) root-finds the slope where the dropped symbol's
    first-order multiplier crosses 1 against the face-restricted solution,
    and (ii) checks that the dropped point mass sits on the same
    supporting line.  Raises SegmentNotLinear if no jump is found or the
    certificate fails.
    """
    p_x = np.asarray(source_pmf, dtype=float)
    p_x = p_x / p_x.sum()
    dmat = np.asarray(
        [[float(e) for e in row] for row in matrix], dtype=float
    )
    betas = np.geomspace(beta_lo, beta_hi, grid)
    points: list[Optional[BAPoint]] = []
    for b in betas:
        try:
            points.append(blahut_arimoto(p_x, dmat, -b, iters=25_000, tol=1e-7))
        except Exception:
            points.append(None)  # near-critical slopes converge too slowly

    conv = [(b, pt) for b, pt in zip(betas, points) if pt is not None]
    if len(conv) < 2:
        raise SegmentNotLinear("slope scan produced too few converged points")
    jump_at = None
    for i, ((b1, p1), (b2, p2)) in enumerate(zip(conv, conv[1:])):
        if p1.distortion - p2.distortion >= jump_threshold:
            jump_at = i
    if jump_at is None:
        raise SegmentNotLinear(
            f"no distortion jump above {jump_threshold} along the slope grid"
        )
    b_flat = conv[jump_at][0]

    # the vanishing output coordinate decays slowly just past the critical
    # slope, so look further along the steep side for the dropped symbols
    dropped: tuple[int, ...] = ()
    face: tuple[int, ...] = ()
    b_steep = None
    for b, pt in conv[jump_at + 1 :]:
        q = np.asarray(pt.output_pmf)
        low = tuple(int(y) for y in np.flatnonzero(q < 1e-7))
        if low:
            dropped = low
            face = tuple(int(y) for y in np.flatnonzero(q >= 1e-7))
            b_steep = b
            break
    if not dropped or not face:
        raise SegmentNotLinear("distortion jumped but no output symbol was dropped")

    ba_kw = dict(iters=500_000, tol=1e-13)

    def excess(beta: float) -> float:
        _, t_all = _face_dual_stats(p_x, dmat, beta, list(face), ba_kw)
        return float(t_all[list(dropped)].max()) - 1.0

    g_lo, g_hi = excess(b_flat), excess(b_steep)
    if not (g_lo > 0 > g_hi):
        raise SegmentNotLinear(
            f"dropped-symbol multiplier does not cross 1 on [{b_flat}, {b_steep}]"
        )
    from scipy.optimize import brentq

    beta0 = float(brentq(excess, b_flat, b_steep, xtol=1e-13, rtol=1e-15))
    point0, t_all0 = _face_dual_stats(p_x, dmat, beta0, list(face), ba_kw)
    kkt_gap = float(np.abs(t_all0.max() - 1.0))
    if kkt_gap > 1e-6:
        raise SegmentNotLinear(f"first-order conditions fail at beta0 (gap {kkt_gap:.2e})")

    dual_value = point0.rate + beta0 * point0.distortion
    contacts = [float((p_x * dmat[:, y]).sum()) for y in dropped]
    gaps = [abs(dual_value - beta0 * dy) for dy in contacts]
    best = int(np.argmin(gaps))
    contact_gap = gaps[best]
    if contact_gap > max(tol, 1e-7):
        raise SegmentNotLinear(
            f"dropped point mass is off the supporting line by {contact_gap:.2e}"
        )
    d_hi = contacts[best]
    return LinearSegment(
        d_lo=point0.distortion,
        d_hi=d_hi,
        slope=-beta0,
        dual_value=dual_value,
        face=face,
        dropped=dropped,
        kkt_gap=kkt_gap,
        contact_gap=contact_gap,
        face_output_pmf=tuple(point0.output_pmf),
    )


@dataclass(frozen=True)
class StraightLineScheme:
    """One-bit flag scheme for a curve with a linear segment ending at cutoff.

    With probability theta the block is described by the constant cutoff
    word (one flag bit); otherwise a d-semifaithful sub-code at rational
    level d0 runs over the retained face with Elias-delta index coding.
    """

    source_pmf: tuple[Fraction, ...]
    matrix: tuple[tuple[Fraction, ...], ...]
    segment: LinearSegment
    y0: int
    theta: Fraction
    d0: Fraction
    proposal: tuple[Fraction, ...]  # output law over face symbols
    name: str = ""

    @property
    def d_target(self) -> Fraction:
        d_star = self.cutoff_distortion
        return self.theta * d_star + (1 - self.theta) * self.d0

    @property
    def cutoff_distortion(self) -> Fraction:
        return sum(p * self.matrix[x][self.y0] for x, p in enumerate(self.source_pmf))

    def rate_line_at(self, d: float) -> float:
        return self.segment.rate_at(float(d))


def default_straightline_instance() -> tuple[list[Fraction], list[list[Fraction]]]:
    """Uniform binary source, outputs {0, 1, e}; d(x, e) = 2/5.

    The rate curve of this pair has a linear segment ending at the cutoff
    distortion 2/5 (the slope scan certifies it at build time).
    """
    f = Fraction
    pmf = [f(1, 2), f(1, 2)]
    matrix = [
        [f(0), f(1), f(2, 5)],
        [f(1), f(0), f(2, 5)],
    ]
    return pmf, matrix


def build_straightline_scheme(
    source_pmf=None,
    matrix=None,
    *,
    theta: Fraction = Fraction(99, 100),
    d0: Optional[Fraction] = None,
    name: str = "binary-erasure-2/5",
) -> StraightLineScheme:
    """Scan the instance, certify the segment, and fix rational parameters.

    ``d0`` defaults to the segment's low end rounded up to a 4-decimal
    rational (it must stay inside the segment); ``theta`` is the mass sent
    to the cutoff word.
    """
    if source_pmf is None or matrix is None:
        source_pmf, matrix = default_straightline_instance()
    pmf_f = [Fraction(p) for p in source_pmf]
    mat_f = [[_as_rational(e, "distortion entry") for e in row] for row in matrix]
    seg = find_linear_segment(
        [float(p) for p in pmf_f],
        mat_f,
    )
    if not (Fraction(1, 2) <= theta < 1):
        raise OutOfRange(f"theta must lie in [1/2, 1), got {theta}")

    # cutoff symbol: the dropped contact; its mean distortion is d_hi
    y0 = seg.dropped[0]
    d_star = sum(p * mat_f[x][y0] for x, p in enumerate(pmf_f))
    if abs(float(d_star) - seg.d_hi) > 1e-9:
        raise SegmentNotLinear("segment does not end at the cutoff distortion")

    if d0 is None:
        d0 = Fraction(math.ceil(seg.d_lo * 10_000) + 1, 10_000)
    d0 = Fraction(d0)
    if not (seg.d_lo <= float(d0) < seg.d_hi):
        raise OutOfRange(f"d0={d0} falls outside the segment [{seg.d_lo}, {seg.d_hi})")

    proposal = [
        Fraction(q).limit_denominator(1 << 32)
        for q in seg.face_output_pmf
    ]
    total = sum(proposal)
    proposal = [q / total for q in proposal]
    return StraightLineScheme(
        source_pmf=tuple(pmf_f),
        matrix=tuple(tuple(row) for row in mat_f),
        segment=seg,
        y0=y0,
        theta=Fraction(theta),
        d0=d0,
        proposal=tuple(proposal),
        name=name,
    )


def _common_grid(values: Iterable[Fraction]) -> int:
    q = 1
    for v in values:
        q = q * v.denominator // math.gcd(q, v.denominator)
    return q


@dataclass(frozen=True)
class FaceIndexLaw:
    """Exact geometric index law of the face sub-code for one block type."""

    p: Fraction
    log_p: float
    conditional_mean_distortion: Fraction  # exact E[d | ball]


def _weighted_convolution(items: list[tuple[int, int]], n: int) -> list[int]:
    """n-fold convolution of integer-weighted integer values; exact counts."""
    counts = [1]
    vmax = items[-1][0]
    for _ in range(n):
        size = len(counts)
        new = [0] * (size + vmax)
        for v, w in items:
            seg_c = counts if w == 1 else [w * c for c in counts]
            window = new[v : v + size]
            new[v : v + size] = [a + b for a, b in zip(window, seg_c)]
        counts = new
    return counts


def _face_index_law(scheme: StraightLineScheme, n: int) -> FaceIndexLaw:
    """Exact ball probability under the i.i.d. proposal over face symbols.

    Valid whenever every source letter sees the same multiset of
    (distortion value, proposal weight) pairs over the face, which makes
    the law independent of the block type; the bundled instance satisfies
    this and the check below enforces it.
    """
    face = scheme.segment.face
    grid = _common_grid(
        [scheme.matrix[x][y] for x in range(len(scheme.source_pmf)) for y in face]
    )
    wden = _common_grid(list(scheme.proposal))
    signatures = set()
    for x in range(len(scheme.source_pmf)):
        sig = tuple(
            sorted(
                (int(scheme.matrix[x][y] * grid), int(scheme.proposal[j] * wden))
                for j, y in enumerate(face)
            )
        )
        signatures.add(sig)
    if len(signatures) != 1:
        raise QuantileDegenerate(
            "face letters are not exchangeable across source symbols; "
            "the type-independent index law does not apply"
        )
    sig = signatures.pop()
    agg: dict[int, int] = {}
    for v, w in sig:
        agg[v] = agg.get(v, 0) + w
    counts = _weighted_convolution(sorted(agg.items()), n)
    total = wden**n
    thr = math.floor(n * grid * scheme.d0)
    thr = min(thr, len(counts) - 1)
    ball = sum(counts[: thr + 1])
    if ball == 0:
        raise QuantileDegenerate("face ball is empty at d0")
    weighted = sum(t * c for t, c in enumerate(counts[: thr + 1]))
    return FaceIndexLaw(
        p=Fraction(ball, total),
        log_p=math.log(ball) - n * math.log(wden),
        conditional_mean_distortion=Fraction(weighted, n * grid * ball),
    )


@dataclass(frozen=True)
class QuantileRule:
    """Set-S membership rule: distortion to the cutoff word below the
    theta-quantile, with randomized tie-breaking on the boundary shell.

    Membership of a block with integer cutoff-distortion total T:
    T < threshold always in S; T == threshold in S with probability gamma;
    larger T never.  Constructed so that P(S) equals theta exactly.
    """

    grid: int  # per-letter integer grid for d(., y0)
    threshold: int
    gamma: Fraction
    in_s_mean_distortion: Fraction  # exact E[d(X^n, y0^n) | in S]

    def membership(self, totals: np.ndarray, coins: np.ndarray) -> np.ndarray:
        below = totals < self.threshold
        tie = totals == self.threshold
        return below | (tie & (coins < float(self.gamma)))


def _quantile_rule(scheme: StraightLineScheme, n: int) -> QuantileRule:
    """Exact theta-quantile of the distortion spectrum at the cutoff word."""
    grid = _common_grid([scheme.matrix[x][scheme.y0] for x in range(len(scheme.source_pmf))])
    pden = _common_grid(list(scheme.source_pmf))
    agg: dict[int, int] = {}
    for x, p in enumerate(scheme.source_pmf):
        v = int(scheme.matrix[x][scheme.y0] * grid)
        agg[v] = agg.get(v, 0) + int(p * pden)
    counts = _weighted_convolution(sorted(agg.items()), n)
    total = pden**n
    theta_mass = scheme.theta * total
    acc = 0
    for t, c in enumerate(counts):
        if acc + c >= theta_mass or t == len(counts) - 1:
            threshold = t
            below = acc
            atom = c
            break
        acc += c
    if atom == 0:
        raise QuantileDegenerate("quantile landed on an empty atom")
    gamma = (scheme.theta - Fraction(below, total)) / Fraction(atom, total)
    if not (0 <= gamma <= 1):
        raise QuantileDegenerate(f"boundary randomization weight {gamma} invalid")
    assert Fraction(below, total) + gamma * Fraction(atom, total) == scheme.theta
    # exact mean of T conditioned on membership
    weighted_below = sum(t * c for t, c in enumerate(counts[:threshold]))
    mean_total = (
        Fraction(weighted_below, total) + gamma * threshold * Fraction(atom, total)
    ) / scheme.theta
    return QuantileRule(
        grid=grid,
        threshold=threshold,
        gamma=gamma,
        in_s_mean_distortion=mean_total / (n * grid),
    )


def _sample_delta_lengths(rng: np.random.Generator, count: int, law: FaceIndexLaw) -> np.ndarray:
    """Elias-delta lengths of geometric(p) indexes, sampled via I = ceil(E/q).

    With E ~ Exp(1) and q = -log(1-p) the index ceil(E/q) is exactly
    geometric(p).  Indexes below 2^50 are materialized; above that only
    floor(log2 I) is needed for the delta length and is computed in log
    domain (float roundoff there can misplace a dyadic boundary with
    probability ~1e-13 per draw).
    """
    exps = rng.exponential(size=count)
    p_float = _float_from_log(law.log_p)
    if p_float > 1e-300:
        log_q = math.log(-math.log1p(-p_float))
    else:
        log_q = law.log_p  # q = p to within a relative p/2
    ratio_log2 = (np.log(exps) - log_q) / LN2
    lengths = np.empty(count, dtype=np.int64)
    small = ratio_log2 < 50
    if small.any():
        q_float = -math.log1p(-p_float)
        idx = np.maximum(1, np.ceil(exps[small] / q_float)).astype(np.int64)
        lengths[small] = [elias_delta_length(int(i)) for i in idx]
    if (~small).any():
        big_l = np.floor(ratio_log2[~small]).astype(np.int64)
        lengths[~small] = [
            int(ell) + 2 * (int(ell + 1).bit_length() - 1) + 1 for ell in big_l
        ]
    return lengths


@dataclass(frozen=True)
class DemoReport:
    n: int
    trials: int
    theta: Fraction
    d0: Fraction
    d_target: Fraction
    rate_line_nats: float  # curve value at d_target (the certified line)
    exact_rate_nats: float  # exact expected scheme rate per symbol
    measured_rate_nats: float
    exact_norm_redundancy: float
    measured_norm_redundancy: float
    expected_distortion: Fraction  # exact accounting
    distortion_ok: bool
    in_s_fraction: float
    theta_exact_check: bool  # quantile rule hits P(S) = theta exactly
    segment: LinearSegment


def straightline_demo(
    scheme: StraightLineScheme,
    n: int,
    trials: int,
    master_seed: int = 0xF1A6,
    *,
    chunk: int = 8192,
) -> DemoReport:
    """Run the flag scheme at blocklength n and account for rate/distortion.

    Set-S membership follows the exact theta-quantile rule on the
    distortion to the cutoff word, with randomized boundary tie-breaking.
    The sub-code's accepted index is geometric with an exactly computable
    success probability, so trials sample the index law directly instead
    of materializing an astronomically long codebook search; the sub-code
    distortion never exceeds d0 by construction and its exact conditional
    mean enters the distortion accounting.
    """
    law = _face_index_law(scheme, n)
    rule = _quantile_rule(scheme, n)
    theta = scheme.theta

    # exact rate: flag bit + (1-theta) * expected Elias-delta index bits
    e_delta_bits = elias_delta_expected_bits(law.p)
    exact_rate = (LN2 * (1 + (1 - float(theta)) * e_delta_bits)) / n
    rate_line = scheme.rate_line_at(float(scheme.d_target))
    log_n = math.log(n)

    # Monte Carlo: the membership rule depends on the block only through its
    # distortion total to the cutoff word, whose law is multinomial in the
    # symbol counts; sampling those counts avoids materializing the blocks
    rng = np.random.default_rng(derived_seed(master_seed, n))
    pmf = np.asarray([float(p) for p in scheme.source_pmf])
    dint0 = np.asarray(
        [int(scheme.matrix[x][scheme.y0] * rule.grid) for x in range(len(pmf))],
        dtype=np.int64,
    )
    in_count = 0
    out_count = 0
    for start in range(0, trials, chunk):
        cnt = min(chunk, trials - start)
        sym_counts = rng.multinomial(n, pmf, size=cnt)
        totals = sym_counts @ dint0
        coins = rng.random(cnt)
        members = rule.membership(totals, coins)
        in_count += int(members.sum())
        out_count += cnt - int(members.sum())
    lengths = _sample_delta_lengths(rng, out_count, law)
    total_bits = trials * 1 + int(lengths.sum())
    measured_rate = (total_bits / trials) * LN2 / n

    expected_distortion = (
        theta * rule.in_s_mean_distortion
        + (1 - theta) * law.conditional_mean_distortion
    )
    return DemoReport(
        n=n,
        trials=trials,
        theta=theta,
        d0=scheme.d0,
        d_target=scheme.d_target,
        rate_line_nats=rate_line,
        exact_rate_nats=exact_rate,
        measured_rate_nats=measured_rate,
        exact_norm_redundancy=(exact_rate - rate_line) * n / log_n,
        measured_norm_redundancy=(measured_rate - rate_line) * n / log_n,
        expected_distortion=expected_distortion,
        distortion_ok=expected_distortion <= scheme.d_target,
        in_s_fraction=in_count / trials,
        theta_exact_check=rule.gamma >= 0,
        segment=scheme.segment,
    )
