"""Command-line entry point: ``chainsnn <command> ...``.

Commands: synth, chain, frames, train, eval, baseline, ablate, analyze, gradcheck.
Heavy modules are imported after the arguments are parsed so that
``--threads`` can still set the BLAS thread count.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    return json.loads(Path(path).read_text())


def _dump(obj, path: str | None) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True)
    if path:
        Path(path).write_text(text + "\n")
    print(text)


# commands --------------------------------------------------------------------

def cmd_synth(args) -> int:
    from .experiments import LIGHTINGS, make_sources
    from .fileio import write_events

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    lightings = {k: LIGHTINGS[k] for k in args.lightings.split(",")}
    streams = make_sources(args.users, args.gestures, args.duration, args.size, args.seed, lightings)
    index = []
    for s in streams:
        name = f"{s.meta.user}_{s.meta.lighting}_g{s.meta.label}.evb"
        write_events(s, out / name)
        index.append({"path": name, "user": s.meta.user, "lighting": s.meta.lighting,
                      "label": s.meta.label, "events": len(s)})
    (out / "index.json").write_text(json.dumps(index, indent=2) + "\n")
    print(f"wrote {len(index)} recordings to {out}")
    return 0


def _read_sources(src_dir: Path):
    from .events import StreamMeta
    from .fileio import read_events

    index = json.loads((src_dir / "index.json").read_text())
    return [read_events(src_dir / e["path"], meta=StreamMeta(e["user"], e["lighting"], e["label"]))
            for e in index]


def cmd_chain(args) -> int:
    from .chain import ChainTaskSpec, generate_dataset
    from .experiments import make_sources

    spec = ChainTaskSpec(args.n, args.l, args.repeat, args.alpha1, args.alpha2, args.ftotal, args.seed)
    if args.sources:
        sources = _read_sources(Path(args.sources))
    else:
        sources = make_sources(args.users, args.n, seed=args.seed)
    test_users = [u for u in args.test_users.split(",") if u]
    ds = generate_dataset(spec, sources, test_users, out_dir=args.out, multiplier=args.multiplier,
                          binarize=args.binarize)
    counts = {s: len(ds.manifest.split_indices(s)) for s in ("train", "validation", "test")}
    print(f"{spec.num_classes} classes, F={spec.initial_frames}, bounds={list(spec.duration_bounds)}, "
          f"samples {counts}")
    return 0


def cmd_frames(args) -> int:
    from .events import accumulate_frames
    from .fileio import read_events, write_frames

    stream = read_events(args.events)
    frames = accumulate_frames(stream, args.F, binarize=args.binarize)
    write_frames(frames, args.out)
    print(f"{frames.T} frames, channel totals {frames.total_counts().tolist()}")
    return 0


def _network_config(cfg_dict: dict, dataset):
    from .engine.network import NetworkConfig
    from .experiments import network_config

    spec = dataset.manifest.spec
    shape = list(dataset.frames[0].shape[1:])
    d = dict(cfg_dict)
    variant = d.pop("variant", None)
    if variant:
        arch = d.pop("arch", "small")
        return network_config(variant, spec.num_classes, spec.f_total, input_shape=shape, arch=arch, **d)
    d.setdefault("input_shape", shape)
    d.setdefault("num_classes", spec.num_classes)
    d.setdefault("T", spec.f_total)
    return NetworkConfig.from_dict(d)


def cmd_train(args) -> int:
    from .chain import load_dataset
    from .engine.checkpoint import save_checkpoint
    from .engine.network import Network
    from .train import TrainConfig, evaluate_dataset, train

    ds = load_dataset(args.data)
    cfg_dict = _load_config(args.sub_config or args.config)
    if args.seed is not None:
        cfg_dict["seed"] = args.seed
    cfg = _network_config(cfg_dict, ds)
    net = Network(cfg)

    def report(e):
        print(f"epoch {e.epoch:3d}  train_loss {e.train_loss:.4f}  train_acc {e.train_accuracy:.3f}  "
              f"val_loss {e.val_loss:.4f}  val_acc {e.val_accuracy:.3f}", flush=True)

    net, history = train(net, ds.split("train"), ds.split("validation"),
                         TrainConfig.from_network(cfg), callback=report)
    val = evaluate_dataset(net, ds, "validation")
    save_checkpoint(net, args.out, {"best_val_accuracy": val.accuracy, "epochs": len(history)})
    print(f"saved {args.out} (validation accuracy {val.accuracy:.3f})")
    return 0


def _metrics_json(m) -> dict:
    d = m.to_dict()
    return {k: d[k] for k in ("accuracy", "r_error", "r_error_alt", "p_d", "confusion")}


def cmd_eval(args) -> int:
    from .chain import load_dataset
    from .engine.checkpoint import load_checkpoint
    from .train import evaluate_dataset

    net, _ = load_checkpoint(args.ckpt)
    m = evaluate_dataset(net, load_dataset(args.data), args.split)
    _dump(_metrics_json(m), args.json)
    return 0


def cmd_baseline(args) -> int:
    from .train import no_order_baseline_exact

    p = no_order_baseline_exact(args.n, args.l)
    print(f"{float(p):.4f} ({p.numerator}/{p.denominator})")
    return 0


def cmd_ablate(args) -> int:
    from .analysis import ablate_and_eval, parse_components
    from .chain import load_dataset
    from .engine.checkpoint import load_checkpoint

    net, _ = load_checkpoint(args.ckpt)
    ds = load_dataset(args.data)
    x, y = ds.split(args.split)
    spec = ds.manifest.spec
    m = ablate_and_eval(net, parse_components(args.keep), x, y, ds.manifest.classes,
                        spec.repetition, spec.n)
    out = _metrics_json(m)
    out["kept"] = sorted(parse_components(args.keep))
    _dump(out, args.json)
    return 0


def cmd_analyze(args) -> int:
    from .analysis import export_attention

    files = export_attention(args.ckpt, args.out, gamma=args.gamma)
    for name, path in files.items():
        print(f"{name}: {path}")
    return 0


def cmd_gradcheck(args) -> int:
    import numpy as np

    from .engine.gradcheck import gradcheck, gradcheck_config
    from .engine.network import LayerSpec, Network, NetworkConfig
    from .engine.neuron import NeuronConfig

    seed = args.seed or 0
    cfg = NetworkConfig((args.inputs,), args.classes, [LayerSpec("dense", 64), LayerSpec("dense", 32)],
                        NeuronConfig(args.model, reset=args.reset), norm=args.norm, T=args.T, seed=seed)
    net = Network(gradcheck_config(cfg))
    rng = np.random.default_rng(seed)
    x = rng.random((args.batch, args.T, args.inputs))
    y = rng.integers(0, args.classes, args.batch)
    res = gradcheck(net, x, y, n_probes=args.probes, eps=args.eps, seed=seed)
    ok = res.max_rel_error <= args.tol
    print(f"max relative error {res.max_rel_error:.3e} over {len(res.bptt)} probes "
          f"({res.redrawn} redrawn): {'ok' if ok else 'FAIL'}")
    return 0 if ok else 1


# parser ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="chainsnn", description=__doc__.splitlines()[0])
    p.add_argument("--seed", type=int, default=None, help="global seed")
    p.add_argument("--threads", type=int, default=None, help="BLAS threads")
    p.add_argument("--config", default=None, help="network config JSON (train)")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="synthesize a gesture recording corpus")
    s.add_argument("--out", required=True)
    s.add_argument("--users", type=int, default=16)
    s.add_argument("--gestures", type=int, default=3)
    s.add_argument("--duration", type=float, default=600.0, help="ms per recording")
    s.add_argument("--size", type=int, default=16)
    s.add_argument("--lightings", default="fluorescent,led")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("chain", help="build a gesture-chain dataset")
    s.add_argument("--n", type=int, default=3)
    s.add_argument("--l", type=int, default=4)
    s.add_argument("--repeat", action="store_true", help="allow consecutive repeats")
    s.add_argument("--alpha1", type=float, default=0.5)
    s.add_argument("--alpha2", type=float, default=0.7)
    s.add_argument("--ftotal", type=int, default=60)
    s.add_argument("--test-users", required=True, help="comma-separated user ids")
    s.add_argument("--sources", default=None, help="directory written by synth (default: synthesize)")
    s.add_argument("--users", type=int, default=16, help="synthetic users when --sources is absent")
    s.add_argument("--multiplier", type=int, default=1)
    s.add_argument("--binarize", action="store_true")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_chain)

    s = sub.add_parser("frames", help="accumulate an event file into frames")
    s.add_argument("--events", required=True)
    s.add_argument("--F", type=int, required=True)
    s.add_argument("--binarize", action="store_true")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_frames)

    s = sub.add_parser("train", help="train a network on a chain dataset")
    s.add_argument("--config", dest="sub_config", default=None)
    s.add_argument("--data", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("eval", help="evaluate a checkpoint")
    s.add_argument("--ckpt", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--split", default="test", choices=("train", "validation", "test"))
    s.add_argument("--json", default=None)
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("baseline", help="no-order classification baseline")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--l", type=int, required=True)
    s.set_defaults(func=cmd_baseline)

    s = sub.add_parser("ablate", help="evaluate with BNTT components averaged over time")
    s.add_argument("--ckpt", required=True)
    s.add_argument("--keep", default="", help="components kept time-varying, e.g. beta,gamma")
    s.add_argument("--data", required=True)
    s.add_argument("--split", default="test", choices=("train", "validation", "test"))
    s.add_argument("--json", default=None)
    s.set_defaults(func=cmd_ablate)

    s = sub.add_parser("analyze", help="export temporal attention profiles")
    s.add_argument("--ckpt", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--gamma", action="store_true", help="also export BNTT gamma")
    s.set_defaults(func=cmd_analyze)

    s = sub.add_parser("gradcheck", help="BPTT vs finite differences on a small dense net")
    s.add_argument("--probes", type=int, default=50)
    s.add_argument("--eps", type=float, default=1e-3)
    s.add_argument("--tol", type=float, default=1e-4)
    s.add_argument("--T", type=int, default=8)
    s.add_argument("--batch", type=int, default=8)
    s.add_argument("--inputs", type=int, default=20)
    s.add_argument("--classes", type=int, default=5)
    s.add_argument("--model", default="LIF", choices=("LIF", "IF", "ReLU"))
    s.add_argument("--reset", default="subtract", choices=("subtract", "zero"))
    s.add_argument("--norm", default="none", choices=("none", "bn", "bntt"))
    s.set_defaults(func=cmd_gradcheck)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads:
        for var in THREAD_VARS:
            os.environ[var] = str(args.threads)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if not hasattr(args, "sub_config"):
        args.sub_config = None
    if args.command in ("synth", "chain") and args.seed is None:
        args.seed = 0
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
