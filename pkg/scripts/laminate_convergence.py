"""Tabulate the laminate functional against the relaxed value for growing k.

    python scripts/laminate_convergence.py [--ks 4,8,16,32,64,128] [--csv out.csv]
"""
import argparse
import math

from softrelax.geometry import Ball, SqrtPotential
from softrelax.laminates import convergence_table, write_convergence_csv
from softrelax.tensors import DevTensor2


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--ks", default="4,8,16,32,64,128")
    ap.add_argument("--beta", type=float, default=1.0)
    ap.add_argument("--csv")
    args = ap.parse_args()

    ks = [int(k) for k in args.ks.split(",")]
    rows = convergence_table(Ball(1.0), SqrtPotential(0.5), 1.0, DevTensor2(1 / math.sqrt(2), 0.0), args.beta, ks)
    prev = None
    print(f"{'k':>5}{'functional':>16}{'gap':>12}{'ratio':>8}")
    for k, val, gap in rows:
        ratio = f"{prev / gap:8.3f}" if prev else " " * 8
        print(f"{k:>5}{val:>16.10f}{gap:>12.3e}{ratio}")
        prev = gap
    if args.csv:
        write_convergence_csv(args.csv, rows)


if __name__ == "__main__":
    main()
