"""Grid search of the static balance parameter over a seeded instance set."""

import argparse

from techdispatch.instances import InstanceConfig, generate_set
from techdispatch.policies import grid_search_alpha


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--count", type=int, default=150)
    ap.add_argument("--seed", type=int, default=1000)
    ap.add_argument("--lo", type=float, default=0.10)
    ap.add_argument("--hi", type=float, default=0.60)
    ap.add_argument("--step", type=float, default=0.05)
    args = ap.parse_args(argv)
    n = int(round((args.hi - args.lo) / args.step))
    grid = [round(args.lo + k * args.step, 4) for k in range(n + 1)]
    best, table = grid_search_alpha(generate_set(InstanceConfig(), args.count, args.seed), grid)
    for a, v in table:
        print(f"{a:.2f},{v:.4f}")
    print(f"best,{best:g}")


if __name__ == "__main__":
    main()
