#!/usr/bin/env python3
"""X/Y separation certificates across matrix sizes.

For every (n, seed) builds the pair, runs both gap checks, the B12 estimate
and the U3/U4 distance, and writes one JSON line per run.

    python scripts/separation_sweep.py --n 8,16,32,64 --seeds 5
"""
import argparse
import json

from qxlab.cli import parse_int_list
from qxlab.separation import build_xy, certify_separation


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", default="8,16,32,64")
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--trials", type=int, default=50)
    args = ap.parse_args()

    for n in parse_int_list(args.n):
        certified = 0
        for seed in range(1, args.seeds + 1):
            rep = certify_separation(build_xy(n, seed), trials=args.trials)
            certified += rep.certified
            print(json.dumps(rep.to_record()), flush=True)
        print(json.dumps({"n": n, "certified_fraction": certified / args.seeds}), flush=True)


if __name__ == "__main__":
    main()
