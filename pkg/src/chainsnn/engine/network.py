"""Feed-forward spiking / ReLU networks with a voting output layer, trained by BPTT.

A network is a stack of blocks ``affine -> norm -> temporal weight -> neuron``
followed by a linear output layer whose per-step outputs are summed over
time. Blocks are feed-forward across layers, so each block is evaluated over
the whole sequence at once; only the neuron recurrence loops over time.

``forward`` returns the class scores and, when ``record=True``, a
:class:`Trace` holding everything ``backward`` needs.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .. import tnorm
from .layers import (conv_backward, conv_forward, conv_out_size, dense_backward,
                     dense_forward, kaiming_uniform)
from .neuron import NeuronConfig, fire, reset, surrogate_derivative

NORMS = ("none", "bn", "bntt")
TEMPORAL_WEIGHTS = ("none", "tw", "twc")


class GeometryMismatchError(ValueError):
    pass


class MissingTraceError(RuntimeError):
    pass


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    out: int
    stride: int = 1
    recurrent: bool = False

    def __post_init__(self) -> None:
        if self.kind not in ("dense", "conv2d"):
            raise ValueError(f"unknown layer kind {self.kind!r}")
        if self.stride not in (1, 2):
            raise ValueError("stride must be 1 or 2")
        if self.recurrent and self.kind != "dense":
            raise ValueError("only dense layers can be recurrent")


@dataclass
class NetworkConfig:
    input_shape: tuple[int, ...]
    num_classes: int
    layers: list[LayerSpec]
    neuron: NeuronConfig = field(default_factory=NeuronConfig)
    norm: str = "bn"
    temporal_weight: str = "none"
    T: int = 24
    lr: float = 0.05
    momentum: float = 0.9
    weight_decay: float = 0.0
    epochs: int = 30
    batch: int = 16
    seed: int = 0
    bn_sqrt: bool = True
    dtype: str = "float32"

    def __post_init__(self) -> None:
        self.input_shape = tuple(self.input_shape)
        self.layers = [l if isinstance(l, LayerSpec) else LayerSpec(**l) for l in self.layers]
        if isinstance(self.neuron, dict):
            self.neuron = NeuronConfig(**self.neuron)
        if self.norm not in NORMS:
            raise ValueError(f"norm must be one of {NORMS}")
        if self.temporal_weight not in TEMPORAL_WEIGHTS:
            raise ValueError(f"temporal_weight must be one of {TEMPORAL_WEIGHTS}")
        if any(l.recurrent for l in self.layers) and not self.neuron.spiking:
            raise ValueError("recurrent layers need a spiking neuron model")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["input_shape"] = list(self.input_shape)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkConfig":
        return cls(**d)

    @classmethod
    def from_json(cls, text: str) -> "NetworkConfig":
        return cls.from_dict(json.loads(text))


@dataclass
class Trace:
    blocks: list
    output: tuple
    train: bool


def _flat_size(shape) -> int:
    return int(np.prod(shape))


class Network:
    def __init__(self, cfg: NetworkConfig, rng: np.random.Generator | None = None):
        self.cfg = cfg
        self.dtype = np.dtype(cfg.dtype)
        rng = rng if rng is not None else np.random.default_rng(cfg.seed)
        self.params: dict[str, np.ndarray] = {}
        self.buffers: dict[str, np.ndarray] = {}
        self.shapes: list[tuple[int, ...]] = []  # per-block output feature shape
        shape = tuple(cfg.input_shape)
        dt = self.dtype
        for l, spec in enumerate(cfg.layers):
            if spec.kind == "conv2d":
                if len(shape) != 3:
                    raise GeometryMismatchError("conv2d after a dense layer")
                cin, h, w = shape
                fan_in = cin * 9
                self.params[f"affine.weight.layer{l}"] = kaiming_uniform(
                    (spec.out, cin, 3, 3), fan_in, rng, dt)
                shape = (spec.out, conv_out_size(h, spec.stride), conv_out_size(w, spec.stride))
            else:
                fan_in = _flat_size(shape)
                self.params[f"affine.weight.layer{l}"] = kaiming_uniform(
                    (spec.out, fan_in), fan_in, rng, dt)
                shape = (spec.out,)
                if spec.recurrent:
                    self.params[f"rec.weight.layer{l}"] = kaiming_uniform(
                        (spec.out, spec.out), spec.out, rng, dt)
            channels = spec.out
            if cfg.norm == "none":
                self.params[f"affine.bias.layer{l}"] = np.zeros(channels, dt)
            else:
                nt = cfg.T if cfg.norm == "bntt" else None
                pshape = (nt, channels) if nt else (channels,)
                self.params[f"{cfg.norm}.gamma.layer{l}"] = np.ones(pshape, dt)
                self.params[f"{cfg.norm}.beta.layer{l}"] = np.zeros(pshape, dt)
                self.buffers[f"{cfg.norm}.mean.layer{l}"] = np.zeros(pshape, dt)
                self.buffers[f"{cfg.norm}.var.layer{l}"] = np.ones(pshape, dt)
            if cfg.temporal_weight == "tw":
                self.params[f"tw.layer{l}"] = np.ones(cfg.T, dt)
            elif cfg.temporal_weight == "twc":
                self.params[f"tw.layer{l}"] = np.ones((cfg.T, channels), dt)
            self.shapes.append(shape)
        fan_in = _flat_size(shape)
        self.params["output.weight"] = kaiming_uniform((cfg.num_classes, fan_in), fan_in, rng, dt)

    @property
    def has_temporal_params(self) -> bool:
        return self.cfg.norm == "bntt" or self.cfg.temporal_weight != "none"

    def state_dict(self) -> dict[str, np.ndarray]:
        return {**{k: v.copy() for k, v in self.params.items()},
                **{k: v.copy() for k, v in self.buffers.items()}}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        for store in (self.params, self.buffers):
            for k in store:
                if k not in state:
                    raise KeyError(f"missing tensor {k!r}")
                if state[k].shape != store[k].shape:
                    raise GeometryMismatchError(f"shape mismatch for {k!r}")
                store[k][...] = state[k]

    def clone(self) -> "Network":
        net = Network.__new__(Network)
        net.cfg, net.dtype, net.shapes = self.cfg, self.dtype, list(self.shapes)
        net.params = {k: v.copy() for k, v in self.params.items()}
        net.buffers = {k: v.copy() for k, v in self.buffers.items()}
        return net

    # forward -----------------------------------------------------------------

    def _check_input(self, x: np.ndarray) -> None:
        if x.ndim != 2 + len(self.cfg.input_shape) or tuple(x.shape[2:]) != self.cfg.input_shape:
            raise GeometryMismatchError(
                f"input of shape {x.shape} does not match (B, T, {self.cfg.input_shape})")
        if self.has_temporal_params and x.shape[1] != self.cfg.T:
            raise GeometryMismatchError(f"sequence length {x.shape[1]} != configured T={self.cfg.T}")

    def forward(self, x: np.ndarray, train: bool = False, record: bool = False,
                update_stats: bool = True, overrides: dict | None = None):
        """Run ``x`` (B, T, *input_shape) through the network.

        Returns ``(scores, trace)``; ``trace`` is None unless ``record``.
        ``overrides`` maps tensor names to replacement arrays for this call only.
        """
        self._check_input(x)
        cfg = self.cfg
        P = {**self.params, **self.buffers, **(overrides or {})}
        h = np.ascontiguousarray(np.swapaxes(x, 0, 1), dtype=self.dtype)  # (T, B, ...)
        T, B = h.shape[:2]
        caches = []
        for l, spec in enumerate(cfg.layers):
            W = P[f"affine.weight.layer{l}"]
            bias = P.get(f"affine.bias.layer{l}")
            in_shape = h.shape
            if spec.kind == "conv2d":
                a, acache = conv_forward(h.reshape((T * B,) + h.shape[2:]), W, bias, spec.stride)
            else:
                a, acache = dense_forward(h.reshape(T * B, -1), W, bias)
            a = a.reshape((T, B) + a.shape[1:])

            ncache = None
            if cfg.norm != "none":
                key = cfg.norm
                a, ncache = tnorm.norm_forward(
                    a, P[f"{key}.gamma.layer{l}"], P[f"{key}.beta.layer{l}"],
                    P[f"{key}.mean.layer{l}"], P[f"{key}.var.layer{l}"],
                    per_time=key == "bntt", train=train, sqrt=cfg.bn_sqrt,
                    update_stats=update_stats)
            tcache = None
            if cfg.temporal_weight != "none":
                a, tcache = tnorm.tw_forward(a, P[f"tw.layer{l}"])

            R = P.get(f"rec.weight.layer{l}")
            if cfg.neuron.spiking:
                o, v = self._spike_forward(a, R)
                actcache = (v, o)
            else:
                o = np.maximum(a, 0)
                actcache = (a,)
            if record:
                caches.append((spec, in_shape, acache, ncache, tcache, actcache))
            h = o

        Wout = P["output.weight"]
        feats = h.reshape(T * B, -1)
        scores = (feats @ Wout.T).reshape(T, B, -1).sum(axis=0)
        trace = Trace(caches, (h.reshape(T, B, -1),), train) if record else None
        return scores, trace

    def _spike_forward(self, y: np.ndarray, R: np.ndarray | None):
        ncfg = self.cfg.neuron
        lam = ncfg.effective_leak
        T = y.shape[0]
        u = np.zeros_like(y[0])
        o_prev = np.zeros_like(y[0])
        v_all = np.empty_like(y)
        o_all = np.empty_like(y)
        for t in range(T):
            v = y[t] + lam * u
            if R is not None:
                v = v + o_prev @ R.T
            o = fire(v, ncfg)
            u = reset(v, o, ncfg)
            v_all[t], o_all[t] = v, o
            o_prev = o
        return o_all, v_all

    # backward ----------------------------------------------------------------

    def backward(self, trace: Trace | None, gscores: np.ndarray,
                 overrides: dict | None = None) -> dict[str, np.ndarray]:
        """Reverse-mode gradients of all parameters given dL/dscores."""
        if trace is None:
            raise MissingTraceError("backward needs a trace recorded with record=True")
        cfg = self.cfg
        P = {**self.params, **(overrides or {})}
        grads: dict[str, np.ndarray] = {}
        gscores = np.asarray(gscores, dtype=self.dtype)
        (feats,) = trace.output
        T, B = feats.shape[:2]
        Wout = P["output.weight"]
        grads["output.weight"] = gscores.T @ feats.sum(axis=0)
        g_o = np.broadcast_to(gscores @ Wout, (T, B, Wout.shape[1]))

        for l in reversed(range(len(trace.blocks))):
            spec, in_shape, acache, ncache, tcache, actcache = trace.blocks[l]
            g_o = g_o.reshape((T, B) + self.shapes[l])
            if cfg.neuron.spiking:
                g, gR = self._spike_backward(g_o, *actcache, P.get(f"rec.weight.layer{l}"))
                if gR is not None:
                    grads[f"rec.weight.layer{l}"] = gR
            else:
                (a,) = actcache
                g = g_o * (a > 0)
            if tcache is not None:
                g, grads[f"tw.layer{l}"] = tnorm.tw_backward(tcache, g)
            if ncache is not None:
                g, ggam, gbet = tnorm.norm_backward(ncache, g)
                grads[f"{cfg.norm}.gamma.layer{l}"] = ggam
                grads[f"{cfg.norm}.beta.layer{l}"] = gbet
            W = P[f"affine.weight.layer{l}"]
            need_input = l > 0
            gflat = g.reshape((T * B,) + g.shape[2:])
            if spec.kind == "conv2d":
                gin, gW, gb = conv_backward(acache, gflat, W, need_input)
            else:
                gin, gW, gb = dense_backward(acache, gflat, W, need_input)
            grads[f"affine.weight.layer{l}"] = gW
            if f"affine.bias.layer{l}" in P:
                grads[f"affine.bias.layer{l}"] = gb
            if need_input:
                g_o = gin.reshape(in_shape)
        return grads

    def _spike_backward(self, g_o, v_all, o_all, R):
        ncfg = self.cfg.neuron
        lam = ncfg.effective_leak
        th = ncfg.threshold
        T = g_o.shape[0]
        gy = np.empty_like(v_all)
        gu = np.zeros_like(v_all[0])     # dL/du_t from step t+1
        go_rec = np.zeros_like(v_all[0])  # dL/do_t through the recurrent weights
        gR = np.zeros_like(R) if R is not None else None
        for t in reversed(range(T)):
            v, o = v_all[t], o_all[t]
            go = g_o[t] + go_rec
            sd = surrogate_derivative(v, ncfg.alpha, ncfg.center)
            if ncfg.reset == "subtract":
                gv = gu + (go - th * gu) * sd
            elif ncfg.detach_zero_reset and not ncfg.soft_spike:
                gv = gu * (1 - o) + go * sd
            else:
                gv = gu * (1 - o) + (go - gu * v) * sd
            gy[t] = gv
            gu = lam * gv
            if R is not None:
                if t > 0:
                    gR += gv.T @ o_all[t - 1]
                go_rec = gv @ R
        return gy, gR

    # helpers -----------------------------------------------------------------

    def predict_scores(self, x: np.ndarray, batch: int = 64) -> np.ndarray:
        out = [self.forward(x[i:i + batch])[0] for i in range(0, len(x), batch)]
        return np.concatenate(out, axis=0) if out else np.empty((0, self.cfg.num_classes))


def forward_sequence(net: Network, frames: np.ndarray, train: bool = False, record: bool = True):
    """Scores and trace for one sequence (T, *input) or a batch (B, T, *input)."""
    x = np.asarray(frames)
    single = x.ndim == 1 + len(net.cfg.input_shape)
    if single:
        x = x[None]
    scores, trace = net.forward(x, train=train, record=record)
    return (scores[0] if single else scores), trace


def bptt_backward(net: Network, trace: Trace | None, gscores: np.ndarray) -> dict[str, np.ndarray]:
    return net.backward(trace, np.atleast_2d(gscores))


def softmax_cross_entropy(scores: np.ndarray, labels: np.ndarray):
    """Mean cross-entropy and its gradient w.r.t. ``scores``."""
    z = scores - scores.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    B = len(labels)
    loss = -logp[np.arange(B), labels].mean()
    g = np.exp(logp)
    g[np.arange(B), labels] -= 1
    return float(loss), g / B
