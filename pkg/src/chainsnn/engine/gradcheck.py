"""Finite-difference check of BPTT gradients.

In gradcheck mode the spike is the triangle's antiderivative, which is C1 but
piecewise quadratic. Central differences are exact on each quadratic piece
and only break when a perturbation moves some membrane potential across a
piece boundary. Such probes are detected by comparing piece indices of every
neuron and redrawn, so the comparison is between BPTT and an exact oracle.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .network import Network, NetworkConfig, softmax_cross_entropy

_BREAKS = np.array([-1.0, 0.0, 1.0])


@dataclass
class GradcheckResult:
    names: list[str]
    indices: list[int]
    bptt: np.ndarray
    numeric: np.ndarray
    rel_error: np.ndarray
    redrawn: int

    @property
    def max_rel_error(self) -> float:
        return float(self.rel_error.max())


def gradcheck_config(cfg: NetworkConfig) -> NetworkConfig:
    return replace(cfg, neuron=replace(cfg.neuron, soft_spike=True), dtype="float64")


def relative_error(a, b, floor: float = 1e-8):
    a, b = np.asarray(a), np.asarray(b)
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)


def _pieces(net: Network, trace) -> np.ndarray:
    if not net.cfg.neuron.spiking:
        # ReLU kink at zero
        return np.concatenate([(c[-1][0] > 0).ravel() for c in trace.blocks]).astype(np.int8)
    center = net.cfg.neuron.center
    return np.concatenate([np.searchsorted(_BREAKS, (c[-1][0] - center).ravel(), side="right")
                           for c in trace.blocks]).astype(np.int8)


def gradcheck(net: Network, x: np.ndarray, y: np.ndarray, n_probes: int = 50, eps: float = 1e-3,
              seed: int = 0, max_draws: int | None = None) -> GradcheckResult:
    """Compare BPTT gradients to central differences on random parameter entries."""
    rng = np.random.default_rng(seed)
    scores, trace = net.forward(x, train=True, record=True, update_stats=False)
    _, gscores = softmax_cross_entropy(scores, y)
    grads = net.backward(trace, gscores)
    base = _pieces(net, trace)

    def loss_and_pieces():
        s, tr = net.forward(x, train=True, record=True, update_stats=False)
        return softmax_cross_entropy(s, y)[0], _pieces(net, tr)

    names = sorted(net.params)
    sizes = np.array([net.params[k].size for k in names], dtype=float)
    picked_names, picked_idx, bp, fd = [], [], [], []
    redrawn = 0
    max_draws = max_draws or 20 * n_probes
    draws = 0
    while len(bp) < n_probes:
        draws += 1
        if draws > max_draws:
            raise RuntimeError("too many probes crossed a piece boundary")
        name = names[rng.choice(len(names), p=sizes / sizes.sum())]
        p = net.params[name]
        j = int(rng.integers(p.size))
        old = p.flat[j]
        p.flat[j] = old + eps
        lp, pp = loss_and_pieces()
        p.flat[j] = old - eps
        lm, pm = loss_and_pieces()
        p.flat[j] = old
        if not (np.array_equal(pp, base) and np.array_equal(pm, base)):
            redrawn += 1
            continue
        picked_names.append(name)
        picked_idx.append(j)
        bp.append(grads[name].flat[j])
        fd.append((lp - lm) / (2 * eps))
    bp, fd = np.array(bp), np.array(fd)
    return GradcheckResult(picked_names, picked_idx, bp, fd, relative_error(bp, fd), redrawn)
