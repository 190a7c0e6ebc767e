"""Leak / reset study: accuracy, R-error and where the errors sit in the chain.

    python scripts/reset_study.py --variants if-sub,if-zero,lif-sub,lif-zero --seeds 0,1,2
"""

import argparse

import numpy as np

from chainsnn.experiments import build_dataset, cached_run
from chainsnn.train import decode, predict


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--variants", default="if-sub,if-zero,lif-sub,lif-zero")
    p.add_argument("--seeds", default="0,1,2")
    p.add_argument("--cache", default=None)
    args = p.parse_args()

    ds = build_dataset("A")
    classes = ds.manifest.classes
    x, y = ds.split("test")
    print("variant    seed  acc    r_err  r_alt  wrong-by-position")
    for variant in args.variants.split(","):
        stats = []
        for seed in map(int, args.seeds.split(",")):
            r = cached_run(variant, ds, seed, "A", args.cache)
            pred = predict(r.net.predict_scores(x))
            wrong = pred != y
            pos = (decode(pred[wrong], classes) != decode(y[wrong], classes)).mean(0)
            stats.append((r.test.accuracy, r.test.r_error))
            print(f"{variant:10s} {seed:4d}  {r.test.accuracy:.3f}  {r.test.r_error:.3f}  "
                  f"{r.test.r_error_alt:.3f}  {np.round(pos, 2).tolist()}", flush=True)
        acc, rerr = np.median(np.array(stats), axis=0)
        print(f"{variant:10s} median accuracy {acc:.3f}, median R-error {rerr:.3f}")


if __name__ == "__main__":
    main()
