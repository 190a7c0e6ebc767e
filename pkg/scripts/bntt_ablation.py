"""Time-averaging ablation of a trained BNTT model (no retraining).

    python scripts/bntt_ablation.py --variant ann-bntt --seed 0
"""

import argparse

from chainsnn.analysis import ablate_and_eval
from chainsnn.experiments import build_dataset, cached_run

KEEP_SETS = ["", "mean", "var", "gamma", "beta", "mean,var", "gamma,beta", "mean,var,gamma,beta"]


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--variant", default="ann-bntt")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cache", default=None)
    args = p.parse_args()

    ds = build_dataset("A")
    net = cached_run(args.variant, ds, args.seed, "A", args.cache).net
    x, y = ds.split("test")
    print("kept time-varying      accuracy")
    for keep in KEEP_SETS:
        m = ablate_and_eval(net, keep, x, y)
        print(f"{keep or 'none':22s} {m.accuracy:.3f}")


if __name__ == "__main__":
    main()
