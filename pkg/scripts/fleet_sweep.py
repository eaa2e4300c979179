"""Policy performance with 2, 3 and 4 experts in a fleet of six.

The dynamic-balance model is the one trained on the three-expert fleet.
"""

import argparse

from benchmarks import policy_specs, print_rows, run_table
from techdispatch.instances import InstanceConfig


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--count", type=int, default=150)
    ap.add_argument("--seed", type=int, default=1000)
    ap.add_argument("--alpha", type=float, default=0.33)
    ap.add_argument("--model")
    args = ap.parse_args(argv)
    rows = []
    for experts in (2, 3, 4):
        cfg = InstanceConfig(num_expert=experts, num_regular=6 - experts)
        for row in run_table(cfg, args.count, args.seed, policy_specs(args.alpha, args.model)):
            rows.append({"experts": experts, **row})
    print_rows(rows)


if __name__ == "__main__":
    main()
