"""Gesture-chain benchmark construction.

Classes are ordered label sequences over N gestures of length L, enumerated
lexicographically. A chained sample concatenates, for each position g, the
first F_g frames of one recording of that gesture; durations F_g are drawn
from [ceil(a1*F), floor(a2*F)] subject to sum(F_g) == F_total.
"""

from __future__ import annotations

import itertools
import json
import logging
import math
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .events import EventStream, FrameSequence, accumulate_frames
from .fileio import read_frames, write_frames

log = logging.getLogger(__name__)

_EPS = 1e-9


class ChainError(ValueError):
    pass


class InfeasibleDurationsError(ChainError):
    pass


class HeterogeneousChainError(ChainError):
    pass


@dataclass(frozen=True)
class ChainTaskSpec:
    n: int                  # distinct gestures
    length: int             # gestures per chain
    repetition: bool = True
    alpha1: float = 0.5
    alpha2: float = 0.7
    f_total: int = 60
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n < 1 or self.length < 1:
            raise ChainError("n and length must be >= 1")
        if not 0 < self.alpha1 <= self.alpha2 <= 1:
            raise ChainError("need 0 < alpha1 <= alpha2 <= 1")
        if self.f_total < self.length:
            raise ChainError("f_total must be >= length")

    @property
    def num_classes(self) -> int:
        return count_classes(self.n, self.length, self.repetition)

    @property
    def initial_frames(self) -> int:
        return round_half_up(compute_initial_F(self.f_total, self.length, self.alpha1, self.alpha2))

    @property
    def duration_bounds(self) -> tuple[int, int]:
        F = self.initial_frames
        return math.ceil(self.alpha1 * F - _EPS), math.floor(self.alpha2 * F + _EPS)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class ChainClass:
    class_id: int
    labels: tuple[int, ...]


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def count_classes(n: int, length: int, repetition: bool) -> int:
    if n < 1 or length < 1:
        raise ChainError("n and length must be >= 1")
    if repetition:
        return n ** length
    if n == 1 and length > 1:
        raise ChainError("no valid chains")
    return n * (n - 1) ** (length - 1)


def enumerate_classes(n: int, length: int, repetition: bool) -> list[ChainClass]:
    count_classes(n, length, repetition)  # validates
    seqs = itertools.product(range(n), repeat=length)
    if not repetition:
        seqs = (s for s in seqs if all(a != b for a, b in zip(s, s[1:])))
    return [ChainClass(i, s) for i, s in enumerate(seqs)]


def class_id_of(labels: Sequence[int], n: int, repetition: bool) -> int:
    """Inverse of the lexicographic enumeration."""
    labels = tuple(int(v) for v in labels)
    if any(not 0 <= v < n for v in labels):
        raise ChainError("label out of range")
    if repetition:
        cid = 0
        for v in labels:
            cid = cid * n + v
        return cid
    if any(a == b for a, b in zip(labels, labels[1:])):
        raise ChainError("consecutive repeat in a repetition-free task")
    # position 0 has n choices, the rest n-1 (skipping the previous label)
    cid = labels[0]
    for prev, v in zip(labels, labels[1:]):
        cid = cid * (n - 1) + (v if v < prev else v - 1)
    return cid


def compute_initial_F(f_total: float, length: int, alpha1: float, alpha2: float) -> float:
    """Initial per-recording frame count giving uniformly spread durations."""
    return (f_total / length) * (2.0 / (alpha1 + alpha2))


def check_feasible(spec: ChainTaskSpec) -> tuple[int, int]:
    lo, hi = spec.duration_bounds
    if lo > hi:
        raise InfeasibleDurationsError(
            f"infeasible duration constraint: empty interval [{lo}, {hi}]")
    if spec.length * lo > spec.f_total:
        raise InfeasibleDurationsError(
            f"infeasible duration constraint: lower bound {spec.length}*{lo} exceeds f_total={spec.f_total}")
    if spec.f_total > spec.length * hi:
        raise InfeasibleDurationsError(
            f"infeasible duration constraint: upper bound {spec.length}*{hi} below f_total={spec.f_total}")
    return lo, hi


def sample_durations(spec: ChainTaskSpec, rng: np.random.Generator) -> list[int]:
    """Draw L integer durations within bounds summing exactly to ``f_total``.

    Sequential conditional draws keep the sum feasible at every step; a final
    random permutation removes positional bias.
    """
    lo, hi = check_feasible(spec)
    L = spec.length
    remaining = spec.f_total
    out = []
    for g in range(L):
        left = L - g - 1
        a = max(lo, remaining - left * hi)
        b = min(hi, remaining - left * lo)
        d = int(rng.integers(a, b + 1))
        out.append(d)
        remaining -= d
    return [out[i] for i in rng.permutation(L)]


def build_chain(recordings: Sequence[FrameSequence], durations: Sequence[int]) -> FrameSequence:
    if len(recordings) != len(durations) or not recordings:
        raise ChainError("need one duration per recording")
    first = recordings[0]
    key = (first.meta.get("user"), first.meta.get("lighting"))
    for rec in recordings:
        if (rec.meta.get("user"), rec.meta.get("lighting")) != key:
            raise HeterogeneousChainError("heterogeneous chain sources")
        if rec.values.shape[1:] != first.values.shape[1:]:
            raise HeterogeneousChainError("heterogeneous chain sources: geometry differs")
    parts = []
    for g, (rec, d) in enumerate(zip(recordings, durations)):
        if d < 1 or rec.T < d:
            raise ChainError(f"recording {g} has {rec.T} frames, {d} requested")
        parts.append(rec.values[:d])
    bounds = np.cumsum([0, *durations]).tolist()
    meta = {"user": key[0], "lighting": key[1], "boundaries": bounds,
            "labels": [rec.meta.get("label") for rec in recordings]}
    return FrameSequence(np.concatenate(parts, axis=0), meta)


@dataclass
class SampleRecord:
    path: str
    class_id: int
    user: str
    lighting: str
    durations: list[int]
    split: str


@dataclass
class DatasetManifest:
    spec: ChainTaskSpec
    classes: list[ChainClass]
    samples: list[SampleRecord] = field(default_factory=list)

    def to_json(self) -> str:
        doc = {
            "spec": self.spec.to_dict(),
            "classes": {str(c.class_id): list(c.labels) for c in self.classes},
            "samples": [asdict(s) for s in self.samples],
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "DatasetManifest":
        doc = json.loads(text)
        spec = ChainTaskSpec(**doc["spec"])
        classes = [ChainClass(int(k), tuple(v)) for k, v in
                   sorted(doc["classes"].items(), key=lambda kv: int(kv[0]))]
        samples = [SampleRecord(**s) for s in doc["samples"]]
        return cls(spec, classes, samples)

    def split_indices(self, split: str) -> list[int]:
        return [i for i, s in enumerate(self.samples) if s.split == split]


@dataclass
class ChainDataset:
    """Manifest plus the chained frame tensors, index-aligned with ``manifest.samples``."""

    manifest: DatasetManifest
    frames: list[np.ndarray]

    def split(self, name: str) -> tuple[np.ndarray, np.ndarray]:
        idx = self.manifest.split_indices(name)
        if not idx:
            return np.empty((0,)), np.empty((0,), dtype=np.int64)
        x = np.stack([self.frames[i] for i in idx])
        y = np.array([self.manifest.samples[i].class_id for i in idx], dtype=np.int64)
        return x, y

    def write(self, out_dir: str | os.PathLike) -> Path:
        out = Path(out_dir)
        (out / "frames").mkdir(parents=True, exist_ok=True)
        for rec, fr in zip(self.manifest.samples, self.frames):
            write_frames(fr, out / rec.path)
        path = out / "manifest.json"
        path.write_text(self.manifest.to_json())
        return path


def load_dataset(data_dir: str | os.PathLike) -> ChainDataset:
    data_dir = Path(data_dir)
    manifest = DatasetManifest.from_json((data_dir / "manifest.json").read_text())
    frames = [read_frames(data_dir / s.path).values for s in manifest.samples]
    return ChainDataset(manifest, frames)


def _stratified_pick(class_ids: list[int], fraction: float, rng: np.random.Generator) -> set[int]:
    """Pick ceil(fraction * n) positions, spread over classes as evenly as possible."""
    n_pick = math.ceil(fraction * len(class_ids) - _EPS)
    by_class: dict[int, list[int]] = {}
    for pos, cid in enumerate(class_ids):
        by_class.setdefault(cid, []).append(pos)
    queues = []
    for cid in sorted(by_class):
        members = by_class[cid]
        queues.append([members[i] for i in rng.permutation(len(members))])
    order = [queues[i] for i in rng.permutation(len(queues))]
    picked: list[int] = []
    depth = 0
    while len(picked) < n_pick:
        for q in order:
            if depth < len(q) and len(picked) < n_pick:
                picked.append(q[depth])
        depth += 1
    return set(picked)


def generate_dataset(spec: ChainTaskSpec, sources: Iterable[EventStream],
                     test_users: Iterable[str], out_dir: str | os.PathLike | None = None,
                     multiplier: int = 1, val_fraction: float = 0.2,
                     binarize: bool = False) -> ChainDataset:
    """Chain every class for every complete (user, lighting) group.

    Sample i uses durations drawn with seed ``spec.seed + i``; the validation
    split is a stratified ``val_fraction`` of the non-test samples.
    """
    test_users = set(test_users)
    if not test_users:
        raise ChainError("empty test user set")
    if multiplier < 1:
        raise ChainError("multiplier must be >= 1")
    check_feasible(spec)
    F = spec.initial_frames

    groups: dict[tuple[str, str], dict[int, EventStream]] = {}
    for s in sources:
        groups.setdefault((s.meta.user, s.meta.lighting), {})[s.meta.label] = s
    classes = enumerate_classes(spec.n, spec.length, spec.repetition)

    recs: list[SampleRecord] = []
    frames: list[np.ndarray] = []
    for user, lighting in sorted(groups):
        gestures = groups[(user, lighting)]
        missing = [g for g in range(spec.n) if g not in gestures]
        if missing:
            log.warning("skipping group user=%s lighting=%s: missing gestures %s",
                        user, lighting, missing)
            continue
        clips = {g: accumulate_frames(gestures[g], F, binarize=binarize) for g in range(spec.n)}
        for cc in classes:
            for _ in range(multiplier):
                idx = len(recs)
                rng = np.random.default_rng(spec.seed + idx)
                durations = sample_durations(spec, rng)
                chained = build_chain([clips[g] for g in cc.labels], durations)
                split = "test" if user in test_users else "train"
                recs.append(SampleRecord(f"frames/{idx:06d}.frs", cc.class_id, user, lighting,
                                         durations, split))
                frames.append(chained.values)

    pool = [i for i, r in enumerate(recs) if r.split == "train"]
    if pool and val_fraction > 0:
        rng = np.random.default_rng(spec.seed)
        picked = _stratified_pick([recs[i].class_id for i in pool], val_fraction, rng)
        for pos in picked:
            recs[pool[pos]].split = "validation"
    if not any(r.split == "test" for r in recs):
        raise ChainError("no samples for the test users")

    dataset = ChainDataset(DatasetManifest(spec, classes, recs), frames)
    if out_dir is not None:
        dataset.write(out_dir)
    return dataset
