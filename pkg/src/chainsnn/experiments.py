"""Desk-scale experiments on synthetic gesture chains.

Experiment A uses predictable windows (alpha 0.5-0.7), experiment B
unpredictable ones (alpha 0.2-1.0); both chain 3 of 3 synthetic gestures on a
16x16 sensor into 24 frames, with repetition (27 classes).
"""

from __future__ import annotations

import logging
import os
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .chain import ChainDataset, ChainTaskSpec, generate_dataset
from .engine.checkpoint import load_checkpoint, save_checkpoint
from .engine.network import LayerSpec, Network, NetworkConfig
from .engine.neuron import NeuronConfig
from .events import StreamMeta
from .synth import default_archetypes, lighting_variant, synth_gesture, user_variant
from .train import EpochLog, Metrics, TrainConfig, evaluate_dataset, train

log = logging.getLogger(__name__)

GEOMETRY = 16
LIGHTINGS = {"led": (1.0, 0.5), "fluorescent": (0.6, 1.5)}  # (event-rate gain, noise rate)

EXPERIMENTS = {
    "A": dict(alpha1=0.5, alpha2=0.7),
    "B": dict(alpha1=0.2, alpha2=1.0),
}


def make_sources(n_users: int, n_gestures: int = 3, duration_ms: float = 600.0,
                 size: int = GEOMETRY, seed: int = 0, lightings=LIGHTINGS):
    """One recording per (user, lighting, gesture); users differ in speed and stroke size."""
    archetypes = default_archetypes(n_gestures)
    out = []
    for u in range(n_users):
        urng = np.random.default_rng([seed, u])
        styles = [user_variant(a, urng) for a in archetypes]
        for li, (lname, (gain, noise)) in enumerate(sorted(lightings.items())):
            for g, style in enumerate(styles):
                arch = lighting_variant(style, gain, noise)
                sample_seed = seed * 1_000_003 + (u * 16 + li) * 64 + g
                out.append(synth_gesture(arch, duration_ms, size, size, sample_seed,
                                         StreamMeta(f"u{u:02d}", lname, g)))
    return out


def experiment_spec(name: str = "A", seed: int = 0, n: int = 3, length: int = 3,
                    f_total: int = 24) -> ChainTaskSpec:
    return ChainTaskSpec(n=n, length=length, repetition=True, f_total=f_total, seed=seed,
                         **EXPERIMENTS[name])


def build_dataset(name: str = "A", seed: int = 0, n_train_users: int = 12, n_test_users: int = 4,
                  multiplier: int = 1, data_seed: int = 0) -> ChainDataset:
    spec = experiment_spec(name, seed)
    sources = make_sources(n_train_users + n_test_users, spec.n, seed=data_seed)
    test_users = [f"u{u:02d}" for u in range(n_train_users, n_train_users + n_test_users)]
    return generate_dataset(spec, sources, test_users, multiplier=multiplier)


# network variants ------------------------------------------------------------

ARCHITECTURES = {
    "small": [LayerSpec("conv2d", 8, 2), LayerSpec("conv2d", 16, 2), LayerSpec("dense", 64)],
    "deep": [LayerSpec("conv2d", 8, 1), LayerSpec("conv2d", 8, 2), LayerSpec("conv2d", 16, 1),
             LayerSpec("conv2d", 16, 2), LayerSpec("dense", 64)],
}


VARIANTS = {
    # name: (neuron model, reset, norm, temporal weight)
    "ann-none": ("ReLU", "subtract", "none", "none"),
    "ann-bn": ("ReLU", "subtract", "bn", "none"),
    "ann-bntt": ("ReLU", "subtract", "bntt", "none"),
    "ann-tw": ("ReLU", "subtract", "bn", "tw"),
    "ann-twc": ("ReLU", "subtract", "bn", "twc"),
    "snn-bn": ("IF", "zero", "bn", "none"),
    "snn-bntt": ("IF", "zero", "bntt", "none"),
    "if-sub": ("IF", "subtract", "bn", "none"),
    "if-zero": ("IF", "zero", "bn", "none"),
    "lif-sub": ("LIF", "subtract", "bn", "none"),
    "lif-zero": ("LIF", "zero", "bn", "none"),
}

DEFAULT_TRAINING = {"ann": dict(lr=0.01, epochs=30), "snn": dict(lr=0.01, epochs=30)}


def network_config(variant: str, num_classes: int = 27, T: int = 24, seed: int = 0,
                   input_shape=(2, GEOMETRY, GEOMETRY), arch: str = "small",
                   **overrides) -> NetworkConfig:
    model, reset, norm, tw = VARIANTS[variant]
    family = "ann" if model == "ReLU" else "snn"
    neuron = NeuronConfig(model=model, reset=reset, leak=0.874)
    kw = dict(DEFAULT_TRAINING[family], batch=16)
    kw.update(overrides)
    return NetworkConfig(input_shape=tuple(input_shape), num_classes=num_classes,
                         layers=list(ARCHITECTURES[arch]), neuron=neuron, norm=norm, temporal_weight=tw,
                         T=T, seed=seed, **kw)


@dataclass
class RunResult:
    variant: str
    experiment: str
    seed: int
    net: Network
    history: list[EpochLog]
    test: Metrics
    seconds: float


def run_variant(variant: str, dataset: ChainDataset, seed: int = 0, experiment: str = "A",
                **overrides) -> RunResult:
    spec = dataset.manifest.spec
    cfg = network_config(variant, spec.num_classes, spec.f_total, seed, **overrides)
    net = Network(cfg)
    t0 = time.perf_counter()
    net, history = train(net, dataset.split("train"), dataset.split("validation"),
                         TrainConfig.from_network(cfg))
    metrics = evaluate_dataset(net, dataset, "test")
    dt = time.perf_counter() - t0
    log.info("%s/%s seed %d: test accuracy %.3f (%.0fs)", experiment, variant, seed,
             metrics.accuracy, dt)
    return RunResult(variant, experiment, seed, net, history, metrics, dt)


def cached_run(variant: str, dataset: ChainDataset, seed: int = 0, experiment: str = "A",
               cache_dir: str | os.PathLike | None = None, **overrides) -> RunResult:
    """``run_variant`` that stores the trained checkpoint and reuses it when present.

    The cache key includes the experiment, variant and seed only, so clear the
    directory after changing datasets or training settings.
    """
    if cache_dir is None:
        return run_variant(variant, dataset, seed, experiment, **overrides)
    path = Path(cache_dir) / f"{experiment}_{variant}_s{seed}.ckpt"
    if path.exists():
        net, extra = load_checkpoint(path)
        return RunResult(variant, experiment, seed, net, [], evaluate_dataset(net, dataset, "test"),
                         extra.get("seconds", 0.0))
    res = run_variant(variant, dataset, seed, experiment, **overrides)
    path.parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(res.net, path, {"seconds": res.seconds, "epochs": len(res.history)})
    return res
