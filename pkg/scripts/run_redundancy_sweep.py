#!/usr/bin/env python3
"""Redundancy sweep experiment: exact Golomb vs Elias rates across blocklengths.

Writes a CSV whose norm_red_golomb column should drift down toward 1/2 and
whose norm_red_elias column stays well above it.

Usage:
    python scripts/run_redundancy_sweep.py [--pair pairs/binary_hamming.json]
        [--D 1/4] [--nmin 64] [--nmax 4096] [--points 13] [--trials 200]
        [--out sweep.csv]
"""

import argparse
import sys
from fractions import Fraction
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from symrd.experiments import redundancy_sweep  # noqa: E402
from symrd.model import load_pair  # noqa: E402

REPO = Path(__file__).resolve().parents[1]


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--pair", default=str(REPO / "pairs" / "binary_hamming.json"))
    ap.add_argument("--D", type=Fraction, default=Fraction(1, 4))
    ap.add_argument("--nmin", type=int, default=64)
    ap.add_argument("--nmax", type=int, default=4096)
    ap.add_argument("--points", type=int, default=13)
    ap.add_argument("--trials", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0x5EED)
    ap.add_argument("--out", default="sweep.csv")
    args = ap.parse_args()

    pair = load_pair(args.pair)
    ratio = (args.nmax / args.nmin) ** (1.0 / max(1, args.points - 1))
    grid = sorted({int(round(args.nmin * ratio**i)) for i in range(args.points)})
    report = redundancy_sweep(
        pair, args.D, grid, trials=args.trials, master_seed=args.seed
    )
    Path(args.out).write_text(report.to_csv())
    print(f"wrote {args.out} ({len(report.rows)} rows)")
    for row in report.rows:
        print(
            f"n={row.n:5d}  golomb={row.norm_red_golomb:.4f}  "
            f"elias={row.norm_red_elias:.4f}  mc={row.mc_trials}"
        )


if __name__ == "__main__":
    main()
