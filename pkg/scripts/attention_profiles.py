"""Train a temporally weighted model and export its attention profiles as CSV.

    python scripts/attention_profiles.py --variant ann-tw --out attention/
"""

import argparse

import numpy as np

from chainsnn.analysis import attention_profiles, com_deviation, export_attention
from chainsnn.experiments import build_dataset, cached_run


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--variant", default="ann-tw", help="ann-tw, ann-twc or a *-bntt variant")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="attention")
    p.add_argument("--gamma", action="store_true")
    p.add_argument("--cache", default=None)
    args = p.parse_args()

    ds = build_dataset("A")
    res = cached_run(args.variant, ds, args.seed, "A", args.cache)
    print(f"test accuracy {res.test.accuracy:.3f}")
    for name, path in export_attention(res.net, args.out, gamma=args.gamma).items():
        print(f"{name}: {path}")
    T = res.net.cfg.T
    profiles = attention_profiles(res.net, args.gamma)
    dev = com_deviation(profiles, T)
    for layer in sorted({p.layer for p in profiles}):
        d = np.array([v for p, v in zip(profiles, dev) if p.layer == layer])
        print(f"layer {layer}: mean |m-(T+1)/2|/T = {d.mean():.3f}, share >= 0.15: {(d >= 0.15).mean():.2f}")


if __name__ == "__main__":
    main()
