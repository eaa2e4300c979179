"""Train the dynamic-balance model and write the model file plus learning curve.

    python scripts/train_db.py --iterations 15000 --out models/db_default.json
"""

import argparse
import logging

from techdispatch.rl.ppo import TrainConfig, train


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--iterations", type=int, default=15000)
    ap.add_argument("--variant", type=int, default=4, help="augmentation preset 1-5")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="models/db_default.json")
    ap.add_argument("--curve", default=None, help="learning-curve CSV (default: next to the model)")
    ap.add_argument("--checkpoint-every", type=int, default=500)
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")
    cfg = TrainConfig.variant(args.variant, iterations=args.iterations, seed=args.seed,
                              checkpoint_every=args.checkpoint_every)
    curve = args.curve or args.out.rsplit(".", 1)[0] + "_curve.csv"
    res = train(cfg, curve_path=curve, model_path=args.out)
    print(f"trained {args.iterations} iterations in {res.seconds:.0f}s; "
          f"{len(res.aborted_iterations)} aborted; model {args.out}; curve {curve}")


if __name__ == "__main__":
    main()
