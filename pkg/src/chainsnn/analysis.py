"""Post-hoc analysis: temporal attention profiles, centers of mass, BNTT ablation."""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import tnorm
from .engine.checkpoint import load_checkpoint
from .engine.network import Network
from .train import Metrics, evaluate

COMPONENT_ALIASES = {"mean": "mean", "var": "var", "variance": "var", "gamma": "gamma",
                     "beta": "beta"}


class NoTemporalParametersError(ValueError):
    pass


@dataclass
class AttentionProfile:
    family: str           # "tw", "beta" or "gamma"
    layer: int
    channel: int | str    # "all" for a per-layer TW weight
    values: np.ndarray    # length T
    m: float
    uniform: bool


def center_of_mass(x, normalized: bool = True) -> tuple[float, bool]:
    """Mass-weighted mean time index (t = 1..T) of the excess over min(x).

    Returns ``(m, uniform_flag)``. All-equal input has no mass and is defined
    as the uniform value (T+1)/2 with the flag set. ``normalized=False`` gives
    the unnormalized sum (1/T) * sum (x_t - min x) * t instead.
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    T = len(x)
    if T == 0:
        raise ValueError("empty profile")
    t = np.arange(1, T + 1)
    mass = x - x.min()
    if not normalized:
        return float((mass * t).sum() / T), bool(not mass.any())
    total = mass.sum()
    if total == 0:
        return (T + 1) / 2, True
    # normalize first so a point mass lands exactly on its index
    return float(((mass / total) * t).sum()), False


def _as_network(ckpt) -> Network:
    if isinstance(ckpt, Network):
        return ckpt
    net, _ = load_checkpoint(ckpt)
    return net


def attention_profiles(ckpt, gamma: bool = False) -> list[AttentionProfile]:
    """Profiles of every temporal parameter: TW/TWC weights and BNTT beta (and gamma)."""
    net = _as_network(ckpt)
    cfg = net.cfg
    families = []
    if cfg.temporal_weight != "none":
        families.append(("tw", "tw.layer{}"))
    if cfg.norm == "bntt":
        families.append(("beta", "bntt.beta.layer{}"))
        if gamma:
            families.append(("gamma", "bntt.gamma.layer{}"))
    if not families:
        raise NoTemporalParametersError("no temporal parameters")
    out = []
    for family, pattern in families:
        for l in range(len(cfg.layers)):
            w = net.params[pattern.format(l)]
            cols = [("all", w)] if w.ndim == 1 else [(c, w[:, c]) for c in range(w.shape[1])]
            for c, values in cols:
                m, flag = center_of_mass(values)
                out.append(AttentionProfile(family, l, c, np.array(values, dtype=np.float64), m, flag))
    return out


def export_attention(ckpt, out_dir: str | os.PathLike, gamma: bool = False) -> dict[str, Path]:
    """Write ``attention_<family>.csv`` and ``com_<family>.csv`` per parameter family.

    Columns: ``layer,channel,t,value`` (t from 1) and ``layer,channel,m,uniform_flag``.
    """
    profiles = attention_profiles(ckpt, gamma)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = {}
    for family in dict.fromkeys(p.family for p in profiles):
        rows = [p for p in profiles if p.family == family]
        vals = out_dir / f"attention_{family}.csv"
        com = out_dir / f"com_{family}.csv"
        with open(vals, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["layer", "channel", "t", "value"])
            for p in rows:
                for t, v in enumerate(p.values, start=1):
                    w.writerow([p.layer, p.channel, t, repr(float(v))])
        with open(com, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["layer", "channel", "m", "uniform_flag"])
            for p in rows:
                w.writerow([p.layer, p.channel, repr(p.m), int(p.uniform)])
        written[f"attention_{family}"] = vals
        written[f"com_{family}"] = com
    return written


def com_deviation(profiles: list[AttentionProfile], T: int) -> np.ndarray:
    """|m - (T+1)/2| / T for each profile."""
    return np.array([abs(p.m - (T + 1) / 2) / T for p in profiles])


def parse_components(spec) -> set[str]:
    if isinstance(spec, str):
        spec = [s for s in spec.split(",") if s.strip()]
    out = set()
    for s in spec:
        key = s.strip().lower()
        if key in ("none", ""):
            continue
        if key == "all":
            out.update(tnorm.COMPONENTS)
            continue
        if key not in COMPONENT_ALIASES:
            raise ValueError(f"unknown BNTT component {s!r}")
        out.add(COMPONENT_ALIASES[key])
    return out


def ablated_network(ckpt, keep) -> Network:
    """Copy of a BNTT network with every component outside ``keep`` averaged over time."""
    net = _as_network(ckpt)
    if net.cfg.norm != "bntt":
        raise ValueError("ablation needs a BNTT network")
    average = set(tnorm.COMPONENTS) - parse_components(keep)
    out = net.clone()
    for l in range(len(net.cfg.layers)):
        store = {**out.params, **out.buffers}
        names = {c: f"bntt.{c}.layer{l}" for c in tnorm.COMPONENTS}
        params = tnorm.BNTTParams(*(store[names[c]] for c in tnorm.COMPONENTS))
        avg = tnorm.bntt_time_average(params, average)
        for c in tnorm.COMPONENTS:
            store[names[c]][...] = getattr(avg, c)
    return out


def ablate_and_eval(ckpt, keep, x: np.ndarray, y: np.ndarray, classes=None,
                    repetition: bool = False, n_gestures: int | None = None) -> Metrics:
    """Evaluate with only the ``keep`` components time-varying (no retraining)."""
    return evaluate(ablated_network(ckpt, keep), x, y, classes, repetition, n_gestures)
