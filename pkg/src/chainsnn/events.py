"""Event streams, frame sequences and event-to-frame accumulation.

Polarity 1 is ON (brightness increase), 0 is OFF. Frame channels are indexed
by polarity value, so channel 1 holds ON counts and channel 0 holds OFF counts.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterator, NamedTuple

import numpy as np

EVENT_DTYPE = np.dtype([("t", "<u8"), ("x", "<u2"), ("y", "<u2"), ("p", "u1")])


class Event(NamedTuple):
    t: int
    x: int
    y: int
    polarity: int


class EmptyStreamError(ValueError):
    pass


@dataclass(frozen=True)
class StreamMeta:
    user: str = ""
    lighting: str = ""
    label: int = 0


@dataclass(frozen=True, eq=False)
class EventStream:
    """Time-sorted events of a ``width`` x ``height`` sensor.

    ``events`` is a structured array with fields ``t`` (µs), ``x``, ``y``, ``p``.
    """

    width: int
    height: int
    events: np.ndarray
    meta: StreamMeta = field(default_factory=StreamMeta)

    def __post_init__(self) -> None:
        ev = np.asarray(self.events)
        if ev.dtype != EVENT_DTYPE:
            ev = ev.astype(EVENT_DTYPE)
        ev.setflags(write=False)
        object.__setattr__(self, "events", ev)
        if len(ev):
            if np.any(ev["t"][1:] < ev["t"][:-1]):
                raise ValueError("events must be sorted by timestamp")
            if ev["x"].max() >= self.width or ev["y"].max() >= self.height:
                raise ValueError("event coordinates outside sensor geometry")
            if ev["p"].max() > 1:
                raise ValueError("invalid polarity")

    @classmethod
    def from_arrays(cls, t, x, y, p, width: int, height: int, meta: StreamMeta | None = None,
                    sort: bool = False) -> "EventStream":
        ev = np.empty(len(t), dtype=EVENT_DTYPE)
        ev["t"], ev["x"], ev["y"], ev["p"] = t, x, y, p
        if sort:
            ev = ev[np.argsort(ev["t"], kind="stable")]
        return cls(width, height, ev, meta or StreamMeta())

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self) -> Iterator[Event]:
        for t, x, y, p in self.events.tolist():
            yield Event(t, x, y, p)

    def same_events(self, other: "EventStream") -> bool:
        return (self.width == other.width and self.height == other.height
                and np.array_equal(self.events, other.events))

    def polarity_counts(self) -> tuple[int, int]:
        """(OFF count, ON count)."""
        on = int(np.count_nonzero(self.events["p"]))
        return len(self) - on, on


@dataclass(frozen=True, eq=False)
class FrameSequence:
    """``values`` has shape (T, 2, H, W); channel c counts events of polarity c."""

    values: np.ndarray
    meta: dict[str, Any] = field(default_factory=dict)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    @property
    def T(self) -> int:
        return self.values.shape[0]

    def total_counts(self) -> np.ndarray:
        return self.values.sum(axis=(0, 2, 3))


def window_indices(t: np.ndarray, n_windows: int) -> np.ndarray:
    """Assign timestamps to ``n_windows`` equal windows over [t.min(), t.max()].

    Boundary ties go to the later window; the final window is closed on the right.
    """
    t = np.asarray(t, dtype=np.uint64)
    t0, t1 = int(t.min()), int(t.max())
    span = t1 - t0
    if span == 0:
        return np.zeros(len(t), dtype=np.int64)
    rel = t - np.uint64(t0)
    if span <= np.iinfo(np.uint64).max // n_windows:
        idx = (rel * np.uint64(n_windows)) // np.uint64(span)
        idx = idx.astype(np.int64)
    else:
        # exact integer arithmetic once the product would overflow 64 bits
        idx = np.array([int(r) * n_windows // span for r in rel.tolist()], dtype=np.int64)
    return np.minimum(idx, n_windows - 1)


def accumulate_frames(stream: EventStream, n_frames: int, binarize: bool = False,
                      dtype=np.float32) -> FrameSequence:
    """Accumulate ``stream`` into ``n_frames`` polarity-count frames."""
    if n_frames < 1:
        raise ValueError("frame count must be >= 1")
    if len(stream) == 0:
        raise EmptyStreamError("empty stream")
    ev = stream.events
    win = window_indices(ev["t"], n_frames)
    counts = np.zeros((n_frames, 2, stream.height, stream.width), dtype=np.int64)
    np.add.at(counts, (win, ev["p"].astype(np.int64), ev["y"].astype(np.int64),
                       ev["x"].astype(np.int64)), 1)
    if binarize:
        counts = np.minimum(counts, 1)
    meta = {"user": stream.meta.user, "lighting": stream.meta.lighting,
            "label": stream.meta.label}
    return FrameSequence(counts.astype(dtype), meta)
