#!/usr/bin/env python3
"""QE fraction of random atomic weight vectors, float vs dyadic-exact.

Continuous Dirichlet weights almost never satisfy an integer relation, so
the float column stays near 1; rounding to a 2^-bits grid reintroduces
relations, and the exact column drops as k grows or bits shrink.

    python scripts/genericity_scan.py --k 1..6 --bits 4,6,8 --trials 2000
"""
import argparse
import csv
import sys

from qxlab.cli import parse_int_list
from qxlab.qe import genericity_sample


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--k", default="1..6")
    ap.add_argument("--bits", default="4,6,8")
    ap.add_argument("--trials", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    bits = parse_int_list(args.bits)
    w = csv.writer(sys.stdout)
    w.writerow(["k", "float"] + [f"exact_bits{b}" for b in bits])
    for k in parse_int_list(args.k):
        row = [k, genericity_sample(k, args.trials, master_seed=args.seed)]
        for b in bits:
            try:
                row.append(genericity_sample(k, args.trials, "exact_rational", master_seed=args.seed, bits=b))
            except ValueError:  # too few grid points for k summands
                row.append("")
        w.writerow(row)
        sys.stdout.flush()


if __name__ == "__main__":
    main()
