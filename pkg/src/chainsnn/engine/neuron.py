"""Integrate-and-fire dynamics and the triangle surrogate gradient."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

MODELS = ("LIF", "IF", "ReLU")
RESETS = ("subtract", "zero")


@dataclass(frozen=True)
class NeuronConfig:
    """Neuron model.

    ``surrogate_center='threshold'`` peaks the triangle at ``threshold``;
    ``'zero'`` uses max(0, 1 - |u|) literally. ``soft_spike`` swaps the
    Heaviside for the triangle's antiderivative so that the surrogate becomes
    the true derivative (used for finite-difference checks).
    """

    model: str = "LIF"
    leak: float = 0.874
    threshold: float = 1.0
    reset: str = "subtract"
    alpha: float = 0.3
    surrogate_center: str = "threshold"
    soft_spike: bool = False
    detach_zero_reset: bool = True

    def __post_init__(self) -> None:
        if self.model not in MODELS:
            raise ValueError(f"unknown neuron model {self.model!r}")
        if self.reset not in RESETS:
            raise ValueError(f"unknown reset {self.reset!r}")
        if not 0 < self.leak <= 1:
            raise ValueError("leak must lie in (0, 1]")
        if self.threshold <= 0 or self.alpha <= 0:
            raise ValueError("threshold and alpha must be positive")
        if self.surrogate_center not in ("threshold", "zero"):
            raise ValueError("surrogate_center must be 'threshold' or 'zero'")

    @property
    def spiking(self) -> bool:
        return self.model != "ReLU"

    @property
    def effective_leak(self) -> float:
        return 1.0 if self.model == "IF" else self.leak

    @property
    def center(self) -> float:
        return self.threshold if self.surrogate_center == "threshold" else 0.0

    def to_dict(self) -> dict:
        return asdict(self)


def surrogate_derivative(u, alpha: float = 0.3, center: float = 1.0):
    """alpha * max(0, 1 - |u - center|)."""
    return alpha * np.maximum(0.0, 1.0 - np.abs(np.asarray(u) - center))


def soft_spike(u, alpha: float = 0.3, center: float = 1.0):
    """Antiderivative of the triangle: piecewise quadratic, rises from 0 to alpha."""
    x = np.clip(np.asarray(u) - center, -1.0, 1.0)
    left = 0.5 * (x + 1.0) ** 2
    right = 1.0 - 0.5 * (1.0 - x) ** 2
    return alpha * np.where(x < 0, left, right)


def fire(v, cfg: NeuronConfig):
    if cfg.soft_spike:
        return soft_spike(v, cfg.alpha, cfg.center).astype(np.result_type(v))
    return (v >= cfg.threshold).astype(np.result_type(v))


def reset(v, o, cfg: NeuronConfig):
    if cfg.reset == "subtract":
        return v - cfg.threshold * o
    return v * (1 - o)


def neuron_step(u, current, cfg: NeuronConfig):
    """One update: integrate with leak, threshold, reset. Returns (spikes, new_u)."""
    if not cfg.spiking:
        raise ValueError("neuron_step needs a spiking model")
    v = np.asarray(current) + cfg.effective_leak * np.asarray(u)
    o = fire(v, cfg)
    return o, reset(v, o, cfg)


def simulate(currents, cfg: NeuronConfig, u0=0.0):
    """Run a neuron (or array of neurons) over a sequence of input currents.

    Returns (spikes, potentials after reset), both stacked over time.
    """
    currents = np.asarray(currents, dtype=np.float64)
    u = np.zeros_like(currents[0]) + u0
    spikes, pots = [], []
    for c in currents:
        o, u = neuron_step(u, c, cfg)
        spikes.append(o)
        pots.append(u)
    return np.stack(spikes), np.stack(pots)
