#!/usr/bin/env python3
"""Second eigenvalue of the symmetrized Haar channel versus n.

Prints one CSV row per (d, n, seed) plus the limiting value sqrt(2d-1)/d,
so the approach to the limit can be plotted with any tool.

    python scripts/lambda2_sweep.py --d 2,3,4 --n 16,32,64,128 --seeds 3
"""
import argparse
import csv
import math
import sys

from qxlab.cli import parse_int_list
from qxlab.haar import sample_tuple
from qxlab.spectral import lambda2


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--d", default="3")
    ap.add_argument("--n", default="16,32,64,128")
    ap.add_argument("--seeds", type=int, default=3)
    args = ap.parse_args()

    w = csv.writer(sys.stdout)
    w.writerow(["d", "n", "seed", "lambda2", "limit", "abs_dev", "epsilon", "iterations"])
    for d in parse_int_list(args.d):
        limit = math.sqrt(2 * d - 1) / d
        for n in parse_int_list(args.n):
            for seed in range(1, args.seeds + 1):
                spec = lambda2(sample_tuple(n, d, seed))
                w.writerow([d, n, seed, f"{spec.lambda2:.8f}", f"{limit:.8f}",
                            f"{abs(spec.lambda2 - limit):.2e}", f"{2 * d * (1 - spec.lambda2):.6f}",
                            spec.iterations])
                sys.stdout.flush()


if __name__ == "__main__":
    main()
