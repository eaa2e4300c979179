"""Policy performance at technician absence rates of 0, 10 and 20 percent."""

import argparse

from benchmarks import policy_specs, print_rows, run_table
from techdispatch.instances import InstanceConfig


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--count", type=int, default=150)
    ap.add_argument("--seed", type=int, default=1000)
    ap.add_argument("--alpha", type=float, default=0.33)
    ap.add_argument("--model")
    args = ap.parse_args(argv)
    rows = []
    for rate in (0.0, 0.1, 0.2):
        cfg = InstanceConfig(absence_prob=rate)
        for row in run_table(cfg, args.count, args.seed, policy_specs(args.alpha, args.model)):
            rows.append({"absence": rate, **row})
    print_rows(rows)


if __name__ == "__main__":
    main()
