"""SGD with momentum."""

from __future__ import annotations

import numpy as np


def sgd_momentum_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray],
                      velocity: dict[str, np.ndarray], lr: float, momentum: float = 0.9,
                      weight_decay: float = 0.0) -> dict[str, np.ndarray]:
    """In place: v <- momentum * v + g;  p <- p - lr * v. Returns ``params``."""
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(p)
        elif g.shape != p.shape:
            raise ValueError(f"gradient shape {g.shape} != parameter shape {p.shape} for {name!r}")
        if weight_decay:
            g = g + weight_decay * p
        v = velocity.get(name)
        if v is None:
            v = velocity[name] = np.zeros_like(p)
        v *= momentum
        v += g
        p -= lr * v
    return params


class SGD:
    def __init__(self, params: dict[str, np.ndarray], lr: float, momentum: float = 0.9,
                 weight_decay: float = 0.0):
        self.params = params
        self.lr = lr
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.velocity = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, grads: dict[str, np.ndarray]) -> None:
        sgd_momentum_step(self.params, grads, self.velocity, self.lr, self.momentum,
                          self.weight_decay)
