"""Affine layers as (forward, backward) function pairs over flat batches."""

from __future__ import annotations

import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

KERNEL = 3
PAD = 1


def kaiming_uniform(shape, fan_in: int, rng: np.random.Generator, dtype=np.float32) -> np.ndarray:
    bound = math.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


def conv_out_size(n: int, stride: int) -> int:
    return (n + 2 * PAD - KERNEL) // stride + 1


def dense_forward(x, W, b=None):
    y = x @ W.T
    if b is not None:
        y = y + b
    return y, x


def dense_backward(x, gy, W, need_input=True):
    gW = gy.T @ x
    gb = gy.sum(axis=0)
    gx = gy @ W if need_input else None
    return gx, gW, gb


def _im2col(x, stride):
    n, c, h, w = x.shape
    xp = np.pad(x, ((0, 0), (0, 0), (PAD, PAD), (PAD, PAD)))
    win = sliding_window_view(xp, (KERNEL, KERNEL), axis=(2, 3))[:, :, ::stride, ::stride]
    ho, wo = win.shape[2], win.shape[3]
    cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(n * ho * wo, c * KERNEL * KERNEL)
    return cols, ho, wo


def conv_forward(x, W, b=None, stride=1):
    """3x3 convolution, padding 1. x: (N, C, H, W); W: (Cout, C, 3, 3)."""
    n = x.shape[0]
    cols, ho, wo = _im2col(x, stride)
    y = cols @ W.reshape(W.shape[0], -1).T
    if b is not None:
        y = y + b
    y = y.reshape(n, ho, wo, W.shape[0]).transpose(0, 3, 1, 2)
    return np.ascontiguousarray(y), (cols, x.shape, stride)


def conv_backward(cache, gy, W, need_input=True):
    cols, xshape, stride = cache
    n, c, h, w = xshape
    cout = W.shape[0]
    ho, wo = gy.shape[2], gy.shape[3]
    gmat = gy.transpose(0, 2, 3, 1).reshape(-1, cout)
    gW = (gmat.T @ cols).reshape(W.shape)
    gb = gmat.sum(axis=0)
    if not need_input:
        return None, gW, gb
    gcols = (gmat @ W.reshape(cout, -1)).reshape(n, ho, wo, c, KERNEL, KERNEL)
    gxp = np.zeros((n, c, h + 2 * PAD, w + 2 * PAD), dtype=gy.dtype)
    for i in range(KERNEL):
        for j in range(KERNEL):
            gxp[:, :, i:i + stride * ho:stride, j:j + stride * wo:stride] += \
                gcols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
    return gxp[:, :, PAD:PAD + h, PAD:PAD + w], gW, gb
