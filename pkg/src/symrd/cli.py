"""Command-line surface.

Subcommands: validate, rdcurve, ballprob, ldbounds, encode, decode,
redundancy-sweep, converse-bound, straightline-demo, verify-all.  Rates are
reported in nats unless a column or key says bits; distortion levels are
exact rationals given as 'p/q' strings.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from fractions import Fraction

from . import codec, exactdist, ldbounds
from .converse import converse_config, finite_n_lower_bound
from .errors import SymrdError
from .experiments import (
    build_straightline_scheme,
    redundancy_sweep,
    straightline_demo,
)
from .model import load_pair
from .rdsolve import rd_grid
from .verify import verify_all

LN2 = math.log(2.0)


def _fraction(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"not an exact rational: {text!r}") from exc


def _common(parser: argparse.ArgumentParser, *, pair=True) -> None:
    if pair:
        parser.add_argument("--pair", required=True, help="pair definition JSON file")
    parser.add_argument("--seed", type=int, default=0x5EED, help="master seed")
    parser.add_argument(
        "--out", choices=("csv", "json"), default="csv", help="tabular output format"
    )
    parser.add_argument(
        "--threads", type=int, default=1, help="thread pool size for Monte Carlo passes"
    )


def _emit_rows(rows: list[dict], fmt: str) -> None:
    if fmt == "json":
        json.dump(rows, sys.stdout, indent=2, default=str)
        sys.stdout.write("\n")
        return
    if not rows:
        return
    keys = list(rows[0].keys())
    print(",".join(keys))
    for row in rows:
        print(",".join(repr(v) if isinstance(v, float) else str(v) for v in (row[k] for k in keys)))


def cmd_validate(args) -> int:
    pair = load_pair(args.pair)
    json.dump(pair.describe(), sys.stdout, indent=2)
    sys.stdout.write("\n")
    return 0


def cmd_rdcurve(args) -> int:
    pair = load_pair(args.pair)
    rows = [
        {
            "D": pt.d,
            "R_nats": pt.rate,
            "R_bits": pt.rate / LN2,
            "lambda_star": pt.lambda_star,
            "slope": pt.slope,
        }
        for pt in rd_grid(pair, args.points)
    ]
    _emit_rows(rows, args.out)
    return 0


def cmd_ballprob(args) -> int:
    pair = load_pair(args.pair)
    method = "log" if args.log else "exact"
    bp = exactdist.ball_probability(pair, args.n, args.D, method=method)
    out = {
        "n": bp.n,
        "D": str(bp.d),
        "prob_rational": None if bp.prob is None else f"{bp.prob.numerator}/{bp.prob.denominator}",
        "prob": None if bp.prob is None else float_or_none(bp.log_prob),
        "log_prob_nats": bp.log_prob,
        "approx": bp.approx,
    }
    json.dump(out, sys.stdout, indent=2)
    sys.stdout.write("\n")
    return 0


def float_or_none(log_value: float):
    try:
        return math.exp(log_value)
    except OverflowError:
        return None


def cmd_ldbounds(args) -> int:
    pair = load_pair(args.pair)
    d = args.D
    sb = ldbounds.sandwich(pair, args.n, float(d))
    out = {
        "n": args.n,
        "D": str(d),
        "rate_nats": sb.rate,
        "log_lower_nats": sb.log_lower,
        "log_upper_nats": sb.log_upper,
        "lower": None if sb.log_lower is None else float_or_none(sb.log_lower),
        "upper": float_or_none(sb.log_upper),
        "n0": sb.constants.n0,
        "M_lower": sb.constants.m_lower,
        "M_upper": sb.constants.m_upper,
        "C_star": sb.constants.c_star,
    }
    try:
        exact = exactdist.ball_probability(pair, args.n, d)
        out["exact_log_prob_nats"] = exact.log_prob
        out["exact"] = float_or_none(exact.log_prob)
    except SymrdError:
        out["exact"] = None
    json.dump(out, sys.stdout, indent=2)
    sys.stdout.write("\n")
    return 0


def cmd_encode(args) -> int:
    pair = load_pair(args.pair)
    data = open(args.input, "rb").read()
    k = pair.alphabet_size
    if any(b >= k for b in data):
        print(f"error: input bytes must be < alphabet size {k}", file=sys.stderr)
        return 2
    n = args.n
    if len(data) == 0 or len(data) % n:
        print(f"error: input length {len(data)} is not a positive multiple of n={n}", file=sys.stderr)
        return 2
    blocks = [data[i : i + n] for i in range(0, len(data), n)]
    codebook = None
    if k == 2:
        dist = codec.index_distribution(pair, n, args.D)
        p_float = math.exp(dist.log_p()) if dist.log_p() > -700 else 0.0
        if p_float > 1e-9:
            capacity = int(min(1 << 22, max(1 << 12, 40.0 / p_float)))
            codebook = codec.PackedBinaryCodebook(args.seed, n, capacity=capacity)
    messages = []
    for block in blocks:
        msg, _ = codec.encode(
            pair, list(block), args.D, args.seed, scheme=args.scheme, codebook=codebook
        )
        messages.append(msg)
    payload = codec.write_container(pair, n, args.D, args.seed, args.scheme, messages)
    with open(args.output, "wb") as fh:
        fh.write(payload)
    total_bits = sum(m.length_bits for m in messages)
    print(
        f"encoded {len(blocks)} blocks of n={n}: {total_bits} payload bits "
        f"({total_bits / (len(blocks) * n):.4f} bits/symbol), container {len(payload)} bytes"
    )
    return 0


def cmd_decode(args) -> int:
    pair = load_pair(args.pair)
    data = open(args.input, "rb").read()
    header, blocks = codec.decode_container(data, pair)
    with open(args.output, "wb") as fh:
        for block in blocks:
            fh.write(bytes(block))
    print(
        f"decoded {header.num_messages} blocks of n={header.n} "
        f"(scheme {header.scheme}, D={header.d}, seed {header.seed})"
    )
    return 0


def cmd_redundancy_sweep(args) -> int:
    pair = load_pair(args.pair)
    grid = _log_grid(args.nmin, args.nmax, args.points)
    report = redundancy_sweep(
        pair,
        args.D,
        grid,
        trials=args.trials,
        master_seed=args.seed,
        threads=args.threads,
    )
    if args.out == "json":
        rows = [row.__dict__ for row in report.rows]
        json.dump(rows, sys.stdout, indent=2, default=str)
        sys.stdout.write("\n")
    else:
        sys.stdout.write(report.to_csv())
    return 0


def _log_grid(nmin: int, nmax: int, points: int) -> list[int]:
    if points <= 1:
        return [nmin]
    ratio = (nmax / nmin) ** (1.0 / (points - 1))
    grid = sorted({int(round(nmin * ratio**i)) for i in range(points)})
    return [n for n in grid if nmin <= n <= nmax]


def cmd_converse_bound(args) -> int:
    pair = load_pair(args.pair)
    d = args.D
    cfg = converse_config(pair, float(d))
    rows = []
    for n in _log_grid(args.nmin, args.nmax, args.points):
        ach = codec.expected_length_exact(pair, n, d, "golomb") / n
        bound = finite_n_lower_bound(pair, float(d), n, cfg)
        rows.append(
            {
                "n": n,
                "lower_nats": bound.lower_rate_nats,
                "achievable_nats": ach,
                "normalized_gap": (ach - bound.lower_rate_nats) * n / math.log(n),
                "trivial": bound.trivial,
            }
        )
    _emit_rows(rows, args.out)
    return 0


def cmd_straightline_demo(args) -> int:
    scheme = build_straightline_scheme(theta=args.theta, d0=args.d0)
    report = straightline_demo(scheme, args.n, args.trials, master_seed=args.seed)
    out = {
        "n": report.n,
        "trials": report.trials,
        "theta": str(report.theta),
        "d0": str(report.d0),
        "d_target": str(report.d_target),
        "segment": [report.segment.d_lo, report.segment.d_hi],
        "segment_slope": report.segment.slope,
        "rate_line_nats": report.rate_line_nats,
        "exact_rate_nats": report.exact_rate_nats,
        "measured_rate_nats": report.measured_rate_nats,
        "exact_norm_redundancy": report.exact_norm_redundancy,
        "measured_norm_redundancy": report.measured_norm_redundancy,
        "expected_distortion": str(report.expected_distortion),
        "distortion_ok": report.distortion_ok,
        "in_s_fraction": report.in_s_fraction,
    }
    json.dump(out, sys.stdout, indent=2)
    sys.stdout.write("\n")
    return 0


def cmd_verify_all(args) -> int:
    pair = load_pair(args.pair)
    results = verify_all(pair)
    width = max(len(r.name) for r in results)
    failures = 0
    for r in results:
        mark = "PASS" if r.passed else "FAIL"
        failures += not r.passed
        print(f"[{mark}] {r.name:<{width}}  {r.detail}")
    print(f"{len(results) - failures}/{len(results)} checks passed")
    return 1 if failures else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="symrd",
        description="Exact redundancy experiments for symmetric rate-distortion coding",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="validate a pair definition file")
    _common(p)
    p.set_defaults(fn=cmd_validate)

    p = sub.add_parser("rdcurve", help="rate-distortion curve as CSV")
    _common(p)
    p.add_argument("--points", type=int, default=20)
    p.set_defaults(fn=cmd_rdcurve)

    p = sub.add_parser("ballprob", help="exact distortion-ball probability")
    _common(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--D", type=_fraction, required=True)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--exact", action="store_true", default=True)
    group.add_argument("--log", action="store_true", help="log-domain float DP")
    p.set_defaults(fn=cmd_ballprob)

    p = sub.add_parser("ldbounds", help="two-sided large-deviations bounds")
    _common(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--D", type=_fraction, required=True)
    p.set_defaults(fn=cmd_ldbounds)

    p = sub.add_parser("encode", help="encode raw bytes (one symbol per byte)")
    _common(p)
    p.add_argument("--n", type=int, required=True, help="blocklength")
    p.add_argument("--D", type=_fraction, required=True)
    p.add_argument("--scheme", choices=("golomb", "elias_delta"), default="golomb")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.set_defaults(fn=cmd_encode)

    p = sub.add_parser("decode", help="decode a container file")
    _common(p)
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.set_defaults(fn=cmd_decode)

    p = sub.add_parser("redundancy-sweep", help="per-blocklength redundancy table")
    _common(p)
    p.add_argument("--D", type=_fraction, required=True)
    p.add_argument("--nmin", type=int, default=64)
    p.add_argument("--nmax", type=int, default=4096)
    p.add_argument("--points", type=int, default=7)
    p.add_argument("--trials", type=int, default=0, help="roundtrip trials per feasible n")
    p.set_defaults(fn=cmd_redundancy_sweep)

    p = sub.add_parser("converse-bound", help="lower bound vs achievable rate")
    _common(p)
    p.add_argument("--D", type=_fraction, required=True)
    p.add_argument("--nmin", type=int, default=64)
    p.add_argument("--nmax", type=int, default=4096)
    p.add_argument("--points", type=int, default=7)
    p.set_defaults(fn=cmd_converse_bound)

    p = sub.add_parser(
        "straightline-demo",
        help="one-bit flag scheme on the bundled linear-segment instance",
    )
    _common(p, pair=False)
    p.add_argument("--n", type=int, default=4096)
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--theta", type=_fraction, default=Fraction(99, 100))
    p.add_argument("--d0", type=_fraction, default=None)
    p.set_defaults(fn=cmd_straightline_demo)

    p = sub.add_parser("verify-all", help="run every invariant check on a pair")
    _common(p)
    p.set_defaults(fn=cmd_verify_all)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except SymrdError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
