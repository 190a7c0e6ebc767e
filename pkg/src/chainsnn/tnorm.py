"""Batch normalization, per-time-step batch normalization (BNTT) and temporal weights.

Activations are laid out (T, B, C, *spatial). Plain BN shares one set of
statistics and affine parameters across time and pools its batch statistics
over (T, B, *spatial); BNTT keeps a separate set per time step.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

EPS = 1e-5
MOMENTUM = 0.1
COMPONENTS = ("mean", "var", "gamma", "beta")


class TimeIndexError(IndexError):
    pass


def _axes(ndim: int, per_time: bool) -> tuple[int, ...]:
    keep = {0, 2} if per_time else {2}
    return tuple(a for a in range(ndim) if a not in keep)


def _bshape(ndim: int, param: np.ndarray, per_time: bool) -> tuple[int, ...]:
    shape = [1] * ndim
    if per_time:
        shape[0] = param.shape[0]
        shape[2] = param.shape[1]
    else:
        shape[2] = param.shape[0]
    return tuple(shape)


def _denom(var, eps, sqrt):
    return np.sqrt(var + eps) if sqrt else var + eps


def norm_forward(x, gamma, beta, running_mean, running_var, *, per_time: bool, train: bool,
                 eps: float = EPS, momentum: float = MOMENTUM, sqrt: bool = True,
                 update_stats: bool = True):
    """Normalize ``x`` (T, B, C, ...). Running statistics are updated in place.

    ``sqrt=False`` divides by var + eps instead of sqrt(var + eps).
    """
    axes = _axes(x.ndim, per_time)
    bs = _bshape(x.ndim, gamma, per_time)
    if train:
        mu = x.mean(axis=axes, keepdims=True)
        xc = x - mu
        var = (xc * xc).mean(axis=axes, keepdims=True)
        if update_stats:
            n = x.size // mu.size
            unbiased = var * (n / (n - 1)) if n > 1 else var
            running_mean *= 1 - momentum
            running_mean += momentum * mu.reshape(running_mean.shape)
            running_var *= 1 - momentum
            running_var += momentum * unbiased.reshape(running_var.shape)
    else:
        mu = running_mean.reshape(bs)
        xc = x - mu
        var = running_var.reshape(bs)
    d = _denom(var, eps, sqrt)
    xhat = xc / d
    out = gamma.reshape(bs) * xhat + beta.reshape(bs)
    return out, (xc, xhat, var, d, gamma, axes, bs, train, sqrt, eps)


def norm_backward(cache, g):
    xc, xhat, var, d, gamma, axes, bs, train, sqrt, eps = cache
    pshape = gamma.shape
    ggamma = (g * xhat).sum(axis=axes).reshape(pshape)
    gbeta = g.sum(axis=axes).reshape(pshape)
    gxhat = g * gamma.reshape(bs)
    if not train:
        return gxhat / d, ggamma, gbeta
    n = xc.size // var.size
    dd_dvar = 0.5 / d if sqrt else 1.0
    gvar = -(gxhat * xc).sum(axis=axes, keepdims=True) * dd_dvar / (d * d)
    gx = (gxhat - gxhat.mean(axis=axes, keepdims=True)) / d + gvar * 2.0 * xc / n
    return gx, ggamma, gbeta


@dataclass
class BNParams:
    mean: np.ndarray
    var: np.ndarray
    gamma: np.ndarray
    beta: np.ndarray
    eps: float = EPS
    momentum: float = MOMENTUM
    sqrt: bool = True

    @classmethod
    def init(cls, channels: int, dtype=np.float32, **kw) -> "BNParams":
        return cls(np.zeros(channels, dtype), np.ones(channels, dtype),
                   np.ones(channels, dtype), np.zeros(channels, dtype), **kw)


@dataclass
class BNTTParams(BNParams):
    """Same fields as :class:`BNParams` with a leading time axis of length T."""

    @classmethod
    def init(cls, channels: int, T: int = 1, dtype=np.float32, **kw) -> "BNTTParams":
        return cls(np.zeros((T, channels), dtype), np.ones((T, channels), dtype),
                   np.ones((T, channels), dtype), np.zeros((T, channels), dtype), **kw)

    @property
    def T(self) -> int:
        return self.gamma.shape[0]

    def copy(self) -> "BNTTParams":
        return replace(self, mean=self.mean.copy(), var=self.var.copy(),
                       gamma=self.gamma.copy(), beta=self.beta.copy())


def bn_forward(x, params: BNParams, train: bool):
    """Plain BN on a batch ``x`` (B, C, ...) for a single step."""
    out, _ = norm_forward(x[None], params.gamma, params.beta, params.mean, params.var,
                          per_time=False, train=train, eps=params.eps,
                          momentum=params.momentum, sqrt=params.sqrt)
    return out[0]


def bntt_forward(x, t: int, params: BNTTParams, mode: str = "train"):
    """Normalize the batch ``x`` (B, C, ...) observed at time step ``t``."""
    if not 0 <= t < params.T:
        raise TimeIndexError("time index beyond configured horizon")
    if mode not in ("train", "infer"):
        raise ValueError("mode must be 'train' or 'infer'")
    sl = slice(t, t + 1)
    mean, var = params.mean[sl], params.var[sl]
    out, _ = norm_forward(x[None], params.gamma[sl], params.beta[sl], mean, var,
                          per_time=True, train=mode == "train", eps=params.eps,
                          momentum=params.momentum, sqrt=params.sqrt)
    params.mean[sl], params.var[sl] = mean, var
    return out[0]


def bntt_time_average(params: BNTTParams, components) -> BNTTParams:
    """Replace each named component by its mean over time (no retraining)."""
    components = set(components)
    unknown = components - set(COMPONENTS)
    if unknown:
        raise ValueError(f"unknown BNTT components {sorted(unknown)}")
    out = params.copy()
    for name in components:
        arr = getattr(out, name)
        arr[...] = arr.mean(axis=0, keepdims=True)
    return out


def tw_forward(y, w):
    """Scale (T, B, C, ...) activations by w (T,) [TW] or w (T, C) [TWC]."""
    shape = [1] * y.ndim
    shape[0] = w.shape[0]
    if w.ndim == 2:
        shape[2] = w.shape[1]
    return y * w.reshape(shape), (y, w, tuple(shape))


def tw_backward(cache, g):
    y, w, shape = cache
    keep = {0, 2} if w.ndim == 2 else {0}
    axes = tuple(a for a in range(y.ndim) if a not in keep)
    gw = (g * y).sum(axis=axes).reshape(w.shape)
    return g * w.reshape(shape), gw


def tw_apply(y, w, t: int | None = None):
    """Scale activations. With ``t`` given, ``y`` is a single step (B, C, ...)."""
    if t is None:
        return tw_forward(y, w)[0]
    wt = w[t]
    if np.ndim(wt) == 0:
        return y * wt
    return y * wt.reshape((1, -1) + (1,) * (y.ndim - 2))
