"""Train and evaluate network variants on desk-scale experiment A or B.

    python scripts/run_experiment.py --experiment A --variants ann-bn,snn-bn,ann-bntt --seeds 0,1,2
"""

import argparse
import json
import logging

import numpy as np

from chainsnn.experiments import VARIANTS, build_dataset, cached_run


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--experiment", default="A", choices=("A", "B"))
    p.add_argument("--variants", default="ann-bn,snn-bn,ann-bntt")
    p.add_argument("--seeds", default="0")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--cache", default=None, help="checkpoint cache directory")
    p.add_argument("--json", default=None, help="write per-run results here")
    p.add_argument("-v", "--verbose", action="store_true")
    args = p.parse_args()
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)

    ds = build_dataset(args.experiment)
    overrides = {"epochs": args.epochs} if args.epochs else {}
    rows = []
    print(f"experiment {args.experiment}: {ds.manifest.spec.num_classes} classes, "
          f"duration bounds {ds.manifest.spec.duration_bounds}")
    for variant in args.variants.split(","):
        if variant not in VARIANTS:
            raise SystemExit(f"unknown variant {variant!r}; choose from {sorted(VARIANTS)}")
        accs = []
        for seed in map(int, args.seeds.split(",")):
            r = cached_run(variant, ds, seed, args.experiment, args.cache, **overrides)
            accs.append(r.test.accuracy)
            rows.append({"variant": variant, "seed": seed, "seconds": r.seconds,
                         **{k: v for k, v in r.test.to_dict().items() if k != "confusion"}})
            rerr = "n/a" if r.test.r_error is None else f"{r.test.r_error:.3f}"
            print(f"{variant:10s} seed {seed}  accuracy {r.test.accuracy:.3f}  r_error {rerr}  "
                  f"({r.seconds:.0f}s)", flush=True)
        print(f"{variant:10s} median {np.median(accs):.3f}  mean {np.mean(accs):.3f} +- {np.std(accs):.3f}")
    if args.json:
        with open(args.json, "w") as f:
            json.dump(rows, f, indent=2)


if __name__ == "__main__":
    main()
