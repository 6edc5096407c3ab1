"""The d-semifaithful codec: shared-seed codebook, index selection, coding.

Encoder and decoder share a 64-bit seed.  The codebook is the deterministic
counter-based stream ``symbol(i, t) = floor(k * w / 2^64)`` with
``w = mix64(mix64(mix64(seed) ^ i) ^ t)`` where ``mix64`` is the
xorshift-multiply finalizer with constants 0x9E3779B97F4A7C15 (pre-add),
0xBF58476D1CE4E5B9 (shift 30), 0x94D049BB133111EB (shift 27) and a final
31-bit shift.  The stream is stateless, bit-exact across platforms and has
per-symbol bias below ``k * 2**-64``.

The encoder picks the smallest index whose codeword lies in the distortion
ball of the source block (an exact integer-grid comparison).  Because the
target channel is uniform on the ball, the classical rejection sampler's
auxiliary uniforms always compare against exactly 0 or 1, so acceptance
degenerates to ball membership and no auxiliary randomness is used.  The
accepted index is geometric with success probability equal to the exact
ball probability, which both sides can compute, so the index is carried by
a Golomb code matched to that law (or by the self-delimiting Elias delta
baseline).
"""

from __future__ import annotations

import hashlib
import json
import math
import struct
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Optional, Sequence

import mpmath as mp
import numpy as np

from .errors import CapExceeded, MalformedBits, OutOfRange, SymbolOutOfRange
from .exactdist import _as_rational, ball_probability
from .model import SymmetricPair

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MULT1 = 0xBF58476D1CE4E5B9
_MULT2 = 0x94D049BB133111EB

LN2 = math.log(2.0)
DEFAULT_INDEX_CAP = 1 << 32


def mix64(z: int) -> int:
    """Scalar finalizer; the single source of truth for the bit mixing."""
    z = (z + _GOLDEN) & _MASK
    z = ((z ^ (z >> 30)) * _MULT1) & _MASK
    z = ((z ^ (z >> 27)) * _MULT2) & _MASK
    return z ^ (z >> 31)


def _mix64_np(z: np.ndarray) -> np.ndarray:
    z = (z + np.uint64(_GOLDEN))
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MULT1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MULT2)
    return z ^ (z >> np.uint64(31))


def _symbols_from_words(w: np.ndarray, k: int) -> np.ndarray:
    """floor(k * w / 2^64) without 128-bit arithmetic (k <= 2^16)."""
    kk = np.uint64(k)
    hi = (w >> np.uint64(32)) * kk
    lo = (w & np.uint64(0xFFFFFFFF)) * kk
    return ((hi + (lo >> np.uint64(32))) >> np.uint64(32)).astype(np.uint16)


class CodebookStream:
    """Deterministic map (index, position) -> symbol for one (seed, n, k)."""

    def __init__(self, seed: int, n: int, alphabet_size: int):
        if n < 1:
            raise OutOfRange(f"blocklength must be >= 1, got {n}")
        if not (2 <= alphabet_size <= 1 << 16):
            raise OutOfRange(f"alphabet size {alphabet_size} unsupported")
        self.seed = seed & _MASK
        self.n = n
        self.alphabet_size = alphabet_size
        self._seed_mix = mix64(self.seed)
        self._t = np.arange(1, n + 1, dtype=np.uint64)

    def symbol(self, i: int, t: int) -> int:
        if i < 1 or not (1 <= t <= self.n):
            raise OutOfRange(f"index {i} / position {t} out of range")
        w = mix64(mix64(self._seed_mix ^ (i & _MASK)) ^ t)
        return (self.alphabet_size * w) >> 64

    def codeword(self, i: int) -> tuple[int, ...]:
        return tuple(int(s) for s in self.batch(i, 1)[0])

    def batch(self, i_start: int, count: int) -> np.ndarray:
        """Codewords i_start .. i_start+count-1 as a (count, n) array."""
        idx = np.arange(i_start, i_start + count, dtype=np.uint64)
        base = _mix64_np(np.uint64(self._seed_mix) ^ idx)
        w = _mix64_np(base[:, None] ^ self._t[None, :])
        return _symbols_from_words(w, self.alphabet_size)


def generate_codeword(seed: int, i: int, n: int, alphabet_size: int) -> tuple[int, ...]:
    """Convenience wrapper over :class:`CodebookStream`."""
    return CodebookStream(seed, n, alphabet_size).codeword(i)


class PackedBinaryCodebook:
    """Materialized bit-packed codebook for fast binary-alphabet searches.

    Intended for repeated encodes against one (seed, n): popcount on packed
    64-bit words makes the in-ball scan cheap.  ``capacity`` bounds the
    largest index; searches beyond it fall back to streaming batches.
    """

    def __init__(self, seed: int, n: int, capacity: int = 1 << 20, chunk: int = 1 << 15):
        self.seed = seed
        self.n = n
        self.capacity = capacity
        self.words_per_row = (n + 63) // 64
        stream = CodebookStream(seed, n, 2)
        rows = []
        for start in range(1, capacity + 1, chunk):
            cnt = min(chunk, capacity + 1 - start)
            sym = stream.batch(start, cnt).astype(np.uint8)
            rows.append(_pack_bits(sym, self.words_per_row))
        self.words = np.concatenate(rows, axis=0)
        self._stream = stream

    def search(self, x: Sequence[int], threshold: int, index_cap: int) -> Optional[int]:
        """Smallest index with Hamming distance <= threshold, or None."""
        xw = _pack_bits(np.asarray(x, dtype=np.uint8)[None, :], self.words_per_row)[0]
        limit = min(self.capacity, index_cap)
        chunk = 1 << 16
        for start in range(0, limit, chunk):
            block = self.words[start : min(limit, start + chunk)]
            dist = np.bitwise_count(block ^ xw[None, :]).sum(axis=1)
            hits = np.flatnonzero(dist <= threshold)
            if hits.size:
                return start + int(hits[0]) + 1
        if limit < index_cap:
            return _stream_search(self._stream, x, threshold, index_cap, start_index=limit + 1)
        return None

    def codeword(self, i: int) -> tuple[int, ...]:
        if 1 <= i <= self.capacity:
            row = self.words[i - 1]
            bits = np.unpackbits(row.view(np.uint8), bitorder="little")
            return tuple(int(b) for b in bits[: self.n])
        return self._stream.codeword(i)


def _pack_bits(sym: np.ndarray, words_per_row: int) -> np.ndarray:
    padded = np.zeros((sym.shape[0], words_per_row * 64), dtype=np.uint8)
    padded[:, : sym.shape[1]] = sym
    return np.packbits(padded, axis=1, bitorder="little").view(np.uint64)


def _stream_search(
    stream: CodebookStream,
    x: Sequence[int],
    threshold: int,
    index_cap: int,
    *,
    dint: Optional[np.ndarray] = None,
    start_index: int = 1,
    batch: int = 4096,
) -> Optional[int]:
    x_arr = np.asarray(x, dtype=np.int64)
    i = start_index
    while i <= index_cap:
        cnt = min(batch, index_cap - i + 1)
        cands = stream.batch(i, cnt).astype(np.int64)
        if dint is None:  # binary Hamming distance
            dist = (cands != x_arr[None, :]).sum(axis=1)
        else:
            dist = dint[x_arr[None, :], cands].sum(axis=1)
        hits = np.flatnonzero(dist <= threshold)
        if hits.size:
            return i + int(hits[0])
        i += cnt
        batch = min(batch * 2, 1 << 16)
    return None


# -- prefix-free integer codes ----------------------------------------------


def _truncated_binary(r: int, m: int) -> str:
    b = (m - 1).bit_length()
    if b == 0:
        return ""
    cut = (1 << b) - m
    if r < cut:
        return format(r, f"0{b - 1}b") if b > 1 else ""
    return format(r + cut, f"0{b}b")


def golomb_encode(i: int, m: int) -> str:
    """Golomb code of positive integer i with run parameter m >= 1."""
    if i < 1 or m < 1:
        raise OutOfRange(f"need i >= 1 and m >= 1, got i={i}, m={m}")
    q, r = divmod(i - 1, m)
    return "1" * q + "0" + _truncated_binary(r, m)


def _golomb_read(bits: str, pos: int, m: int) -> tuple[int, int]:
    q = 0
    while pos < len(bits) and bits[pos] == "1":
        q += 1
        pos += 1
    if pos >= len(bits):
        raise MalformedBits("unary run is not terminated")
    pos += 1  # the terminating zero
    b = (m - 1).bit_length()
    if b == 0:
        return q + 1, pos
    cut = (1 << b) - m
    if b == 1:
        head = 0
    else:
        if pos + b - 1 > len(bits):
            raise MalformedBits("remainder is truncated")
        head = int(bits[pos : pos + b - 1], 2)
        pos += b - 1
    if head < cut:
        r = head
    else:
        if pos >= len(bits):
            raise MalformedBits("remainder is truncated")
        r = head * 2 + (bits[pos] == "1") - cut
        pos += 1
    if r >= m:
        raise MalformedBits(f"remainder {r} out of range for m={m}")
    return q * m + r + 1, pos


def golomb_decode(bits: str, m: int) -> int:
    i, pos = _golomb_read(bits, 0, m)
    if pos != len(bits):
        raise MalformedBits(f"{len(bits) - pos} trailing bits after one codeword")
    return i


def elias_delta_encode(i: int) -> str:
    if i < 1:
        raise OutOfRange(f"need i >= 1, got {i}")
    ell = i.bit_length() - 1  # floor(log2 i)
    lp = ell + 1
    u = lp.bit_length() - 1
    gamma = "0" * u + format(lp, "b")
    mantissa = format(i - (1 << ell), f"0{ell}b") if ell else ""
    return gamma + mantissa


def _elias_delta_read(bits: str, pos: int) -> tuple[int, int]:
    u = 0
    while pos < len(bits) and bits[pos] == "0":
        u += 1
        pos += 1
    if pos + u + 1 > len(bits):
        raise MalformedBits("gamma header is truncated")
    lp = int(bits[pos : pos + u + 1], 2)
    pos += u + 1
    ell = lp - 1
    if pos + ell > len(bits):
        raise MalformedBits("mantissa is truncated")
    val = (1 << ell) + (int(bits[pos : pos + ell], 2) if ell else 0)
    return val, pos + ell


def elias_delta_decode(bits: str) -> int:
    i, pos = _elias_delta_read(bits, 0)
    if pos != len(bits):
        raise MalformedBits(f"{len(bits) - pos} trailing bits after one codeword")
    return i


def elias_delta_length(i: int) -> int:
    ell = i.bit_length() - 1
    return ell + 2 * ((ell + 1).bit_length() - 1) + 1


# -- index law and expected lengths ------------------------------------------


def _mpf_fraction(fr: Fraction) -> mp.mpf:
    return mp.mpf(fr.numerator) / mp.mpf(fr.denominator)


def golomb_parameter(p) -> int:
    """Smallest m >= 1 with (1-p)^m + (1-p)^(m+1) <= 1.

    This is the run length that makes the Golomb code an optimal prefix
    code for a geometric law with success probability p.  Exact Fraction
    arithmetic decides small m; for tiny p (astronomical m) the boundary is
    resolved with mpmath at precision comfortably beyond the digit count of
    m, escalating if the inequality margin is ever ambiguous.
    """
    p = _as_rational(p, "success probability")
    if not (0 < p < 1):
        if p == 1:
            return 1
        raise OutOfRange(f"p must be in (0, 1], got {p}")
    beta = 1 - p
    bn, bd = beta.numerator, beta.denominator
    cn, cd = (2 - p).numerator, (2 - p).denominator

    def holds(m: int) -> bool:
        # beta^m (2-p) <= 1, in integers
        return bn**m * cn <= bd**m * cd

    # float estimate of the boundary ln(2-p)/(-ln(1-p)), then an exact walk;
    # integer pow keeps the check cheap as long as m * log2(denominator)
    # stays moderate
    log_beta = math.log1p(-float(p)) if float(p) > 0 else None
    if log_beta is not None and log_beta < 0:
        est = math.log(2.0 - float(p)) / (-log_beta)
    else:
        est = None
    if est is not None and est * bd.bit_length() < 5e7 and est < 1e6:
        m = max(1, math.floor(est))
        while m > 1 and holds(m - 1):
            m -= 1
        while not holds(m):
            m += 1
        return m

    # -log10(p) ~ digit count of m; resolve the boundary a bit beyond that
    log10_p = (p.numerator.bit_length() - p.denominator.bit_length()) * math.log10(2)
    digits = max(80, int(-log10_p) + 40)
    while digits <= 1 << 15:
        with mp.workdps(digits):
            lb = mp.log1p(-_mpf_fraction(p))
            target = mp.log(2 - _mpf_fraction(p))
            m = int(mp.floor(target / (-lb))) + 1
            margin_hi = m * lb + target  # must be <= 0
            margin_lo = (m - 1) * lb + target  # must be > 0 unless m == 1
            fuzz = mp.mpf(10) ** (5 - digits)  # roundoff envelope of the margins
            if margin_hi < -fuzz and (m == 1 or margin_lo > fuzz):
                return m
        digits *= 2
    raise OutOfRange(f"cannot resolve Golomb parameter for p={p}")


@dataclass(frozen=True)
class IndexDistribution:
    """Geometric law of the accepted index for one (pair, n, D)."""

    n: int
    d: Fraction
    p: Fraction
    entropy_nats: float
    golomb_m: int

    @property
    def expected_index(self) -> float:
        try:
            return 1.0 / float(self.p)
        except (OverflowError, ZeroDivisionError):
            return math.inf

    def log_p(self) -> float:
        return math.log(self.p.numerator) - math.log(self.p.denominator)


@lru_cache(maxsize=64)
def index_distribution(pair: SymmetricPair, n: int, d: Fraction) -> IndexDistribution:
    d = _as_rational(d)
    bp = ball_probability(pair, n, d)
    p = bp.prob
    if p is None or p == 0:
        raise OutOfRange(f"ball probability vanishes at n={n}, D={d}")
    if p == 1:
        return IndexDistribution(n=n, d=d, p=p, entropy_nats=0.0, golomb_m=1)
    with mp.workdps(80):
        pm = _mpf_fraction(p)
        h = -(pm * mp.log(pm) + (1 - pm) * mp.log1p(-pm))
        entropy = float(h / pm)
    return IndexDistribution(
        n=n, d=d, p=p, entropy_nats=entropy, golomb_m=golomb_parameter(p)
    )


def golomb_expected_bits(p, m: Optional[int] = None) -> float:
    """Exact expected Golomb length, in bits, of a geometric(p) index.

    The code length is affine in the unary quotient, so the geometric
    series closes in two powers of (1-p):

        E[len] = (1 + (b-1)(1 - beta^T) + b (beta^T - beta^m)) / (1 - beta^m)

    with beta = 1-p, b = ceil(log2 m) and T = 2^b - m.  Evaluated with
    mpmath at a precision tied to the digit count of m.
    """
    p = _as_rational(p, "success probability")
    m = golomb_parameter(p) if m is None else m
    if p == 1:
        return float(len(golomb_encode(1, m)))
    b = (m - 1).bit_length()
    cut = (1 << b) - m
    with mp.workdps(max(60, len(str(m)) + 40)):
        lb = mp.log1p(-_mpf_fraction(p))
        bt = mp.e ** (cut * lb)
        bm = mp.e ** (m * lb)
        return float((1 + (b - 1) * (1 - bt) + b * (bt - bm)) / (1 - bm))


def elias_delta_expected_bits(p) -> float:
    """Exact expected Elias-delta length, in bits, of a geometric(p) index.

    Delta lengths are constant on dyadic index blocks, so the series is
    summed blockwise; the loop stops once a rigorous bound on the remaining
    mass-weighted lengths drops below 1e-30 of the total.
    """
    p = _as_rational(p, "success probability")
    if p == 1:
        return float(elias_delta_length(1))
    with mp.workdps(80):
        lb = mp.log1p(-_mpf_fraction(p))
        total = mp.mpf(0)
        j = 0
        while True:
            lo = mp.e ** ((2**j - 1) * lb)
            hi = mp.e ** ((2 ** (j + 1) - 1) * lb)
            total += (lo - hi) * elias_delta_length(1 << j)
            if lo < mp.mpf(1e-40) * max(total, mp.mpf(1)) and j > 4:
                # remaining mass decays doubly exponentially; bound the tail
                # by 3(j+2) * lo / (1 - beta^(2^j)) and stop
                tail = 3 * (j + 2) * lo / (1 - mp.e ** ((2**j) * lb))
                if tail < mp.mpf(1e-30) * total:
                    break
            j += 1
        return float(total)


def expected_length_exact(pair: SymmetricPair, n: int, d, scheme: str = "golomb") -> float:
    """Exact expected codeword length of the index code, in nats."""
    dist = index_distribution(pair, n, _as_rational(d))
    if scheme == "golomb":
        return golomb_expected_bits(dist.p, dist.golomb_m) * LN2
    if scheme == "elias_delta":
        return elias_delta_expected_bits(dist.p) * LN2
    raise OutOfRange(f"unknown scheme {scheme!r}")


# -- encode / decode ----------------------------------------------------------


@dataclass(frozen=True)
class EncodedMessage:
    bits: str
    scheme: str

    @property
    def length_bits(self) -> int:
        return len(self.bits)

    @property
    def length_nats(self) -> float:
        return len(self.bits) * LN2


def _validate_block(pair: SymmetricPair, x) -> np.ndarray:
    arr = np.asarray(x, dtype=np.int64)
    if arr.ndim != 1 or arr.size < 1:
        raise OutOfRange("source block must be a nonempty 1-d sequence")
    if arr.min() < 0 or arr.max() >= pair.alphabet_size:
        raise SymbolOutOfRange(
            f"symbols must lie in [0, {pair.alphabet_size}), got range "
            f"[{arr.min()}, {arr.max()}]"
        )
    return arr


def encode(
    pair: SymmetricPair,
    x,
    d,
    seed: int,
    *,
    scheme: str = "golomb",
    index_cap: int = DEFAULT_INDEX_CAP,
    codebook: Optional[PackedBinaryCodebook] = None,
) -> tuple[EncodedMessage, tuple[int, ...]]:
    """Encode one block; returns the message and the chosen codeword.

    The codeword always satisfies ``d(x, y) <= D`` exactly; if no codeword
    within ``index_cap`` lands in the ball, CapExceeded is raised (with the
    probability of that event, which is (1-p)^cap).
    """
    if scheme not in ("golomb", "elias_delta"):
        raise OutOfRange(f"unknown scheme {scheme!r}")
    d = _as_rational(d)
    if not (0 < d < pair.d_star):
        raise OutOfRange(f"distortion level {d} outside (0, {pair.d_star})")
    arr = _validate_block(pair, x)
    n = arr.size
    threshold = math.floor(n * pair.q * d)

    if codebook is not None and pair.alphabet_size == 2:
        if codebook.seed != seed or codebook.n != n:
            raise OutOfRange("codebook was built for different (seed, n)")
        # popcount measures mismatches; rescale the grid threshold by the
        # off-diagonal grid value (a binary symmetric matrix is [[0,v],[v,0]])
        v = pair.matrix.int_entries[0][1]
        idx = codebook.search(arr, threshold // v, index_cap)
        chosen = codebook.codeword(idx) if idx is not None else None
    else:
        stream = CodebookStream(seed, n, pair.alphabet_size)
        dint = None
        if pair.alphabet_size != 2 or pair.matrix.int_entries != ((0, 1), (1, 0)):
            dint = np.asarray(pair.matrix.int_entries, dtype=np.int64)
        idx = _stream_search(stream, arr, threshold, index_cap, dint=dint)
        chosen = stream.codeword(idx) if idx is not None else None

    if idx is None:
        dist = index_distribution(pair, n, d)
        with mp.workdps(60):
            lf = float(index_cap * mp.log1p(-_mpf_fraction(dist.p)) / mp.log(10))
        raise CapExceeded(
            f"no in-ball codeword among the first {index_cap}; "
            f"log10 P(miss) = {lf:.3f}"
        )

    if scheme == "golomb":
        m = index_distribution(pair, n, d).golomb_m
        bits = golomb_encode(idx, m)
    else:
        bits = elias_delta_encode(idx)
    return EncodedMessage(bits=bits, scheme=scheme), chosen


def decode(
    pair: SymmetricPair,
    message: EncodedMessage,
    n: int,
    d,
    seed: int,
) -> tuple[int, ...]:
    """Recover the codeword from the index bits and the shared codebook."""
    d = _as_rational(d)
    if message.scheme == "golomb":
        m = index_distribution(pair, n, d).golomb_m
        idx = golomb_decode(message.bits, m)
    elif message.scheme == "elias_delta":
        idx = elias_delta_decode(message.bits)
    else:
        raise MalformedBits(f"unknown scheme tag {message.scheme!r}")
    return CodebookStream(seed, n, pair.alphabet_size).codeword(idx)


# -- container format ---------------------------------------------------------

MAGIC = b"SYMRD1"
_SCHEME_TAGS = {"golomb": 0, "elias_delta": 1}
_TAG_SCHEMES = {v: k for k, v in _SCHEME_TAGS.items()}
_HEADER = struct.Struct("<6sBQQQQ8sQQ")


def pair_digest(pair: SymmetricPair) -> bytes:
    """8-byte digest of the canonical matrix, for container self-description."""
    canon = json.dumps(
        [[str(e) for e in row] for row in pair.matrix.entries]
    ).encode()
    return hashlib.sha256(canon).digest()[:8]


def _pack_payload(bitstrings: Sequence[str]) -> tuple[bytes, int]:
    bits = "".join(bitstrings)
    nbits = len(bits)
    padded = bits + "0" * (-nbits % 8)
    payload = bytes(
        int(padded[i : i + 8], 2) for i in range(0, len(padded), 8)
    )
    return payload, nbits


def _unpack_payload(payload: bytes, nbits: int) -> str:
    bits = "".join(format(byte, "08b") for byte in payload)
    if len(bits) < nbits:
        raise MalformedBits("payload shorter than declared bit length")
    return bits[:nbits]


def write_container(
    pair: SymmetricPair,
    n: int,
    d,
    seed: int,
    scheme: str,
    messages: Sequence[EncodedMessage],
) -> bytes:
    d = _as_rational(d)
    if d.numerator >= 1 << 64 or d.denominator >= 1 << 64:
        raise OutOfRange("distortion numerator/denominator must fit in 64 bits")
    payload, nbits = _pack_payload([m.bits for m in messages])
    header = _HEADER.pack(
        MAGIC,
        _SCHEME_TAGS[scheme],
        n,
        d.numerator,
        d.denominator,
        seed & _MASK,
        pair_digest(pair),
        len(messages),
        nbits,
    )
    return header + payload


@dataclass(frozen=True)
class ContainerHeader:
    scheme: str
    n: int
    d: Fraction
    seed: int
    num_messages: int
    payload_bits: int


def read_container(data: bytes, pair: SymmetricPair) -> tuple[ContainerHeader, list[int]]:
    """Parse a container and return the header plus decoded indexes."""
    if len(data) < _HEADER.size:
        raise MalformedBits("container shorter than its header")
    magic, tag, n, dnum, dden, seed, digest, count, nbits = _HEADER.unpack(
        data[: _HEADER.size]
    )
    if magic != MAGIC:
        raise MalformedBits(f"bad magic {magic!r}")
    if tag not in _TAG_SCHEMES:
        raise MalformedBits(f"unknown scheme tag {tag}")
    if digest != pair_digest(pair):
        raise MalformedBits("container was written for a different pair")
    header = ContainerHeader(
        scheme=_TAG_SCHEMES[tag],
        n=n,
        d=Fraction(dnum, dden),
        seed=seed,
        num_messages=count,
        payload_bits=nbits,
    )
    bits = _unpack_payload(data[_HEADER.size :], nbits)
    indexes = []
    pos = 0
    if header.scheme == "golomb":
        m = index_distribution(pair, n, header.d).golomb_m
        for _ in range(count):
            idx, pos = _golomb_read(bits, pos, m)
            indexes.append(idx)
    else:
        for _ in range(count):
            idx, pos = _elias_delta_read(bits, pos)
            indexes.append(idx)
    if pos != nbits:
        raise MalformedBits(f"{nbits - pos} unread payload bits")
    return header, indexes


def decode_container(data: bytes, pair: SymmetricPair) -> tuple[ContainerHeader, list[tuple[int, ...]]]:
    header, indexes = read_container(data, pair)
    stream = CodebookStream(header.seed, header.n, pair.alphabet_size)
    return header, [stream.codeword(i) for i in indexes]
