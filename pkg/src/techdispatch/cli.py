"""Command-line entry point: ``techdispatch <command> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .errors import TechDispatchError
from .instances import InstanceConfig, load_set, write_set

log = logging.getLogger("techdispatch")


def _read_config(path) -> dict:
    if path is None:
        return {}
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise TechDispatchError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def cmd_generate(args) -> int:
    data = _read_config(args.config)
    data = data.get("instance", data)
    cfg = InstanceConfig.from_dict(data)
    seed = args.seed if args.seed is not None else cfg.seed
    paths = write_set(cfg, args.count, seed, args.out)
    print(f"wrote {len(paths)} instances to {args.out}")
    return 0


def cmd_run(args) -> int:
    from .experiments.metrics import evaluate
    from .experiments.report import emit_report
    from .policies import parse_policy

    policy = parse_policy(args.policy)
    report = evaluate(policy, args.instances, record_routes=bool(args.routes))
    cfg = {"policy": args.policy, "instances": str(args.instances)}
    if report.results:
        first = load_set_config(args.instances)
        if first:
            cfg["instance_config"] = first
    emit_report(report, args.out, cfg, route_periods=args.routes or ())
    print(f"{report.policy}: inconvenience {report.inconvenience.mean:.4f} "
          f"(se {report.inconvenience.se:.4f}), delay {report.delay.mean:.4f}, "
          f"{report.n_instances} instances, {len(report.failures)} failures")
    for name, err in report.failures:
        print(f"FAILED {name}: {err}", file=sys.stderr)
    return 1 if report.failures else 0


def load_set_config(instance_dir) -> dict | None:
    manifest = Path(instance_dir) / "manifest.json"
    if manifest.exists():
        return json.loads(manifest.read_text()).get("config")
    return None


def cmd_train(args) -> int:
    from .rl.ppo import TrainConfig, train

    data = _read_config(args.config)
    if args.seed is not None:
        data["seed"] = args.seed
    if args.iterations is not None:
        data["iterations"] = args.iterations
    if args.variant is not None:
        data["variant"] = args.variant
    cfg = TrainConfig.from_dict(data)
    curve = args.curve or str(Path(args.out).with_suffix("")) + "_curve.csv"
    res = train(cfg, curve_path=curve, model_path=args.out)
    print(f"trained {cfg.iterations} iterations in {res.seconds:.0f}s "
          f"({len(res.aborted_iterations)} aborted); model {args.out}; curve {curve}")
    return 0


def cmd_gridsearch(args) -> int:
    from .policies import grid_search_alpha

    insts = load_set(args.instances)
    grid = [float(a) for a in args.grid.split(",")] if args.grid else None
    best, table = grid_search_alpha(insts, grid)
    for a, v in table:
        print(f"alpha {a:.2f}  inconvenience {v:.4f}")
    print(f"best alpha {best:g}")
    return 0


def cmd_analyze(args) -> int:
    from .experiments.analysis import feature_impact_table
    from .rl.model import load_model

    rows = feature_impact_table(load_model(args.model), args.instances)
    lines = ["feature,below_pct,above_pct,n_below,n_above"]
    lines += [f"{r.feature},{r.below_pct:.2f},{r.above_pct:.2f},{r.n_below},{r.n_above}" for r in rows]
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    print(text, end="")
    return 0


def cmd_oracle(args) -> int:
    from .experiments.oracle import selftest

    if not args.selftest:
        print("nothing to do; pass --selftest")
        return 2
    result = selftest(seed=args.seed or 0)
    for k, v in result.items():
        print(f"{k}: {v}")
    return 0 if not any(result.values()) else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="techdispatch", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a seeded instance set")
    g.add_argument("--config", help="JSON instance config")
    g.add_argument("--count", type=int, default=150)
    g.add_argument("--seed", type=int, help="base seed (overrides the config)")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    r = sub.add_parser("run", help="evaluate a policy on an instance set")
    r.add_argument("--policy", required=True, help="mysf|myex|myef|sf|ex|ef|sb:<alpha>|db:<model>")
    r.add_argument("--instances", required=True)
    r.add_argument("--out", required=True)
    r.add_argument("--routes", type=int, nargs="*", help="periods whose routes are dumped")
    r.set_defaults(func=cmd_run)

    t = sub.add_parser("train", help="train the dynamic-balance model")
    t.add_argument("--config", help="JSON training config")
    t.add_argument("--out", required=True, help="model file")
    t.add_argument("--curve", help="learning-curve CSV")
    t.add_argument("--iterations", type=int)
    t.add_argument("--variant", type=int, choices=range(1, 6))
    t.add_argument("--seed", type=int)
    t.set_defaults(func=cmd_train)

    s = sub.add_parser("gridsearch", help="static alpha grid search")
    s.add_argument("--instances", required=True)
    s.add_argument("--grid", help="comma-separated alphas (default 0.10..0.60 step 0.05)")
    s.set_defaults(func=cmd_gridsearch)

    a = sub.add_parser("analyze", help="feature-impact table of a trained model")
    a.add_argument("--model", required=True)
    a.add_argument("--instances", required=True)
    a.add_argument("--out")
    a.set_defaults(func=cmd_analyze)

    o = sub.add_parser("oracle", help="exact small-state checks")
    o.add_argument("--selftest", action="store_true")
    o.add_argument("--seed", type=int)
    o.set_defaults(func=cmd_oracle)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (TechDispatchError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
