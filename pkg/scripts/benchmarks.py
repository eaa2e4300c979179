"""Evaluate every policy on a seeded instance set and print one line per policy.

    python scripts/benchmarks.py --count 150 --seed 1000 --model models/db_default.json
"""

import argparse
import csv
import sys

from techdispatch.experiments.metrics import evaluate
from techdispatch.instances import InstanceConfig, generate_set
from techdispatch.policies import parse_policy

POLICIES = ("mysf", "myex", "myef", "sf", "ex", "ef")


def policy_specs(alpha, model):
    specs = list(POLICIES) + [f"sb:{alpha:g}"]
    if model:
        specs.append(f"db:{model}")
    return specs


def run_table(config, count, seed, specs):
    insts = generate_set(config, count, seed)
    rows = []
    for spec in specs:
        r = evaluate(parse_policy(spec), insts)
        rows.append({
            "policy": spec.split(":")[0] if spec.startswith("db:") else spec,
            "inconvenience": r.inconvenience.mean,
            "se": r.inconvenience.se,
            "delay": r.delay.mean,
            "returning_visits": r.returning_visits.mean,
            "revisited_share": r.revisit_shares[1] + r.revisit_shares[2],
            "leftover_days": r.leftover_days.mean,
            "technician_days": r.technician_days.mean,
        })
    return rows


def print_rows(rows, out=sys.stdout):
    w = csv.DictWriter(out, fieldnames=list(rows[0]) if rows else [], lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: f"{v:.4f}" if isinstance(v, float) else v for k, v in row.items()})


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--count", type=int, default=150)
    ap.add_argument("--seed", type=int, default=1000)
    ap.add_argument("--alpha", type=float, default=0.33)
    ap.add_argument("--model", help="trained model for the dynamic-balance policy")
    ap.add_argument("--experts", type=int, default=3)
    ap.add_argument("--absence", type=float, default=0.1)
    args = ap.parse_args(argv)
    cfg = InstanceConfig(num_expert=args.experts, num_regular=6 - args.experts,
                         absence_prob=args.absence)
    print_rows(run_table(cfg, args.count, args.seed, policy_specs(args.alpha, args.model)))


if __name__ == "__main__":
    main()
