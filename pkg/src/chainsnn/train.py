"""Training loop, evaluation and chain-specific metrics."""

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .chain import ChainClass, enumerate_classes
from .engine.network import Network, softmax_cross_entropy
from .engine.optim import SGD

log = logging.getLogger(__name__)


class ClassCountMismatchError(ValueError):
    pass


@dataclass
class TrainConfig:
    epochs: int = 30
    lr: float = 0.05
    batch: int = 16
    seed: int = 0
    momentum: float = 0.9
    weight_decay: float = 0.0
    early_stopping: bool = True

    @classmethod
    def from_network(cls, cfg, **overrides) -> "TrainConfig":
        base = dict(epochs=cfg.epochs, lr=cfg.lr, batch=cfg.batch, seed=cfg.seed,
                    momentum=cfg.momentum, weight_decay=cfg.weight_decay)
        base.update(overrides)
        return cls(**base)


@dataclass
class EpochLog:
    epoch: int
    train_loss: float
    train_accuracy: float
    val_loss: float
    val_accuracy: float
    best_val_loss: float
    best_val_accuracy: float


@dataclass
class Metrics:
    accuracy: float
    confusion: np.ndarray
    r_error: float | None = None
    r_error_alt: float | None = None
    p_d: float | None = None
    loss: float | None = None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["confusion"] = self.confusion.tolist()
        return d


def predict(scores: np.ndarray) -> np.ndarray:
    """Argmax; ties resolve to the lowest class id."""
    return np.argmax(scores, axis=1)


def _batched_loss(net: Network, x: np.ndarray, y: np.ndarray, batch: int = 64):
    scores = net.predict_scores(x, batch)
    loss, _ = softmax_cross_entropy(scores.astype(np.float64), y)
    return loss, scores


def train(net: Network, train_data: tuple[np.ndarray, np.ndarray],
          val_data: tuple[np.ndarray, np.ndarray] | None, cfg: TrainConfig,
          callback: Callable[[EpochLog], None] | None = None) -> tuple[Network, list[EpochLog]]:
    """SGD-with-momentum BPTT on cross-entropy of the accumulated scores.

    Returns the network holding the weights with the best validation accuracy
    (the last epoch's weights when early stopping is off) and the epoch log.
    """
    xtr, ytr = train_data
    if len(xtr) == 0:
        raise ValueError("empty training split")
    if ytr.max() >= net.cfg.num_classes:
        raise ClassCountMismatchError(
            f"labels reach {int(ytr.max())} but the network has {net.cfg.num_classes} outputs")
    if cfg.early_stopping and (val_data is None or len(val_data[0]) == 0):
        raise ValueError("early stopping needs a non-empty validation split")

    rng = np.random.default_rng(cfg.seed)
    opt = SGD(net.params, cfg.lr, cfg.momentum, cfg.weight_decay)
    history: list[EpochLog] = []
    best_acc, best_loss, best_state = -1.0, math.inf, None
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(xtr))
        losses, correct = [], 0
        for i in range(0, len(order), cfg.batch):
            idx = order[i:i + cfg.batch]
            scores, trace = net.forward(xtr[idx], train=True, record=True)
            loss, gscores = softmax_cross_entropy(scores.astype(np.float64), ytr[idx])
            grads = net.backward(trace, gscores)
            opt.step(grads)
            losses.append(loss * len(idx))
            correct += int((predict(scores) == ytr[idx]).sum())
        train_loss = float(np.sum(losses) / len(xtr))
        if val_data is not None and len(val_data[0]):
            val_loss, vs = _batched_loss(net, *val_data)
            val_acc = float((predict(vs) == val_data[1]).mean())
        else:
            val_loss, val_acc = math.nan, math.nan
        if not math.isnan(val_acc) and val_acc > best_acc:
            best_acc, best_state = val_acc, net.state_dict()
        if not math.isnan(val_loss):
            best_loss = min(best_loss, val_loss)
        entry = EpochLog(epoch, train_loss, correct / len(xtr), float(val_loss), val_acc,
                         best_loss, best_acc)
        history.append(entry)
        log.info("epoch %d train_loss %.4f train_acc %.3f val_loss %.4f val_acc %.3f",
                 epoch, train_loss, entry.train_accuracy, val_loss, val_acc)
        if callback is not None:
            callback(entry)
    if cfg.early_stopping and best_state is not None:
        net.load_state_dict(best_state)
    return net, history


def decode(class_ids: Sequence[int], classes: Sequence[ChainClass]) -> np.ndarray:
    table = np.array([c.labels for c in classes])
    return table[np.asarray(class_ids)]


def r_error(predictions: Sequence[int], truths: Sequence[int], classes: Sequence[ChainClass],
            compare_to: str = "predicted") -> float | None:
    """Share of wrong chains with a miss-classified position repeating the previous gesture.

    ``compare_to='predicted'`` checks pred[i] == pred[i-1]; ``'true'`` checks
    pred[i] == true[i-1]. Returns None when no prediction is wrong.
    """
    predictions = np.asarray(predictions)
    truths = np.asarray(truths)
    wrong = predictions != truths
    if not wrong.any():
        return None
    p = decode(predictions[wrong], classes)
    t = decode(truths[wrong], classes)
    if p.shape[1] < 2:
        return 0.0
    prev = p[:, :-1] if compare_to == "predicted" else t[:, :-1]
    hit = (p[:, 1:] != t[:, 1:]) & (p[:, 1:] == prev)
    return float(hit.any(axis=1).mean())


def _orderings(counts) -> int:
    n = sum(counts)
    out = math.factorial(n)
    for c in counts:
        out //= math.factorial(c)
    return out


def no_order_baseline_exact(n: int, length: int) -> Fraction:
    """Accuracy of a perfect multiset detector that cannot see order, as a fraction.

    Each class is guessed uniformly among the orderings of its gesture multiset.
    """
    C = n ** length
    total = Fraction(0)
    for labels in enumerate_classes(n, length, True):
        total += Fraction(1, _orderings(Counter(labels.labels).values()))
    return total / C


def no_order_baseline(n: int, length: int) -> float:
    return float(no_order_baseline_exact(n, length))


def evaluate(net: Network, x: np.ndarray, y: np.ndarray,
             classes: Sequence[ChainClass] | None = None, repetition: bool = False,
             n_gestures: int | None = None, batch: int = 64) -> Metrics:
    if len(x) == 0:
        raise ValueError("empty sample set")
    loss, scores = _batched_loss(net, x, y, batch)
    pred = predict(scores)
    C = net.cfg.num_classes
    confusion = np.zeros((C, C), dtype=np.int64)
    np.add.at(confusion, (y, pred), 1)
    m = Metrics(float((pred == y).mean()), confusion, loss=float(loss))
    if classes is not None and repetition:
        m.r_error = r_error(pred, y, classes, "predicted")
        m.r_error_alt = r_error(pred, y, classes, "true")
        if n_gestures is not None:
            m.p_d = no_order_baseline(n_gestures, len(classes[0].labels))
    return m


def evaluate_dataset(net: Network, dataset, split: str = "test") -> Metrics:
    x, y = dataset.split(split)
    spec = dataset.manifest.spec
    return evaluate(net, x, y, dataset.manifest.classes, spec.repetition, spec.n)
