"""Synthetic gesture recordings.

A gesture is a bright stroke shape (bar, cross or ring) moving along an
elliptical trajectory. Intensity is rendered on a 1 ms grid; each pixel emits
Poisson ON events where its intensity rises and OFF events where it falls, so
ON events sit on the leading edge and OFF on the trailing edge. Uniform
background noise is added on top.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .events import EVENT_DTYPE, EventStream, StreamMeta

SHAPES = ("bar", "cross", "ring")
_STROKE = 0.5   # full intensity within this distance of the stroke
_FALLOFF = 1.0  # linear ramp to zero over this many pixels
_JITTER = 1.0   # max per-sample centre offset, px


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class GestureArchetype:
    archetype_id: int
    shape: str
    size: float = 3.5               # half-length (bar, cross) or radius (ring), px
    axis: float = 0.0               # oscillation axis angle, rad
    amplitude: float = 2.0          # px along the axis
    eccentricity: float = 0.5       # minor/major ratio of the trajectory
    angular_velocity: float = 2 * math.pi / 200.0  # rad/ms
    event_rate: float = 5.0         # events/ms per pixel per unit intensity change/ms
    noise_rate: float = 0.5         # uniform background events/ms over the sensor
    phase: float | None = None      # trajectory start phase, rad; None draws it from the seed

    def __post_init__(self) -> None:
        if self.shape not in SHAPES:
            raise ValueError(f"unknown shape {self.shape!r}; expected one of {SHAPES}")

    @property
    def extent(self) -> float:
        return self.size + self.amplitude + _STROKE + _FALLOFF + _JITTER


def default_archetypes(n: int = 3, **overrides) -> list[GestureArchetype]:
    """The first ``n`` catalog archetypes; each id gets its own shape and axis."""
    if not 1 <= n <= len(SHAPES):
        raise ValueError(f"catalog holds {len(SHAPES)} distinguishable shapes, got n={n}")
    axes = (0.0, math.pi / 2, math.pi / 4)
    return [GestureArchetype(i, SHAPES[i], axis=axes[i], **overrides) for i in range(n)]


def _segment_distance(px, py, ax, ay, bx, by):
    dx, dy = bx - ax, by - ay
    L2 = dx * dx + dy * dy
    s = np.clip(((px - ax) * dx + (py - ay) * dy) / L2, 0.0, 1.0)
    return np.hypot(px - (ax + s * dx), py - (ay + s * dy))


def shape_distance(shape: str, size: float, px, py, cx, cy) -> np.ndarray:
    """Distance from pixel centres (px, py) to the stroke of a shape centred at (cx, cy)."""
    if shape == "bar":
        return _segment_distance(px, py, cx - size, cy, cx + size, cy)
    if shape == "cross":
        return np.minimum(_segment_distance(px, py, cx - size, cy, cx + size, cy),
                          _segment_distance(px, py, cx, cy - size, cx, cy + size))
    if shape == "ring":
        return np.abs(np.hypot(px - cx, py - cy) - size)
    raise ValueError(f"unknown shape {shape!r}")


def render_intensity(archetype: GestureArchetype, centres: np.ndarray, width: int,
                     height: int) -> np.ndarray:
    """Intensity (S, H, W) in [0, 1] for S shape centres."""
    ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)
    cx = centres[:, 0, None, None]
    cy = centres[:, 1, None, None]
    d = shape_distance(archetype.shape, archetype.size, xs[None], ys[None], cx, cy)
    return np.clip(1.0 - (d - _STROKE) / _FALLOFF, 0.0, 1.0)


def synth_gesture(archetype: GestureArchetype, duration_ms: float, width: int, height: int,
                  seed: int, meta: StreamMeta | None = None) -> EventStream:
    """Deterministic synthetic recording of ``archetype`` lasting ``duration_ms``."""
    if width < 8 or height < 8:
        raise GeometryError("geometry must be at least 8x8")
    if duration_ms <= 0:
        raise ValueError("duration must be positive")
    if archetype.extent > min(width, height) / 2:
        raise GeometryError("shape exceeds geometry")
    rng = np.random.default_rng(seed & 0xFFFFFFFFFFFFFFFF)
    meta = meta or StreamMeta(label=archetype.archetype_id)

    n_steps = max(1, math.ceil(duration_ms))
    horizon_us = int(round(duration_ms * 1000))
    phase = rng.uniform(0, 2 * math.pi)
    if archetype.phase is not None:
        phase = archetype.phase
    offset = rng.uniform(-_JITTER, _JITTER, size=2)
    centre0 = np.array([(width - 1) / 2, (height - 1) / 2]) + offset

    # n_steps + 1 samples so that every 1 ms step has a start and end intensity
    tm = np.arange(n_steps + 1, dtype=np.float64)
    ang = archetype.angular_velocity * tm + phase
    major = np.array([math.cos(archetype.axis), math.sin(archetype.axis)])
    minor = np.array([-major[1], major[0]])
    centres = (centre0
               + archetype.amplitude * np.cos(ang)[:, None] * major
               + archetype.amplitude * archetype.eccentricity * np.sin(ang)[:, None] * minor)

    chunks = []
    if archetype.event_rate > 0:
        intensity = render_intensity(archetype, centres, width, height)
        delta = np.diff(intensity, axis=0)
        for pol, lam in ((1, np.maximum(delta, 0.0)), (0, np.maximum(-delta, 0.0))):
            counts = rng.poisson(archetype.event_rate * lam)
            step, y, x = np.nonzero(counts)
            reps = counts[step, y, x]
            step, y, x = np.repeat(step, reps), np.repeat(y, reps), np.repeat(x, reps)
            chunks.append((step, x, y, np.full(len(step), pol)))
    if archetype.noise_rate > 0:
        per_step = rng.poisson(archetype.noise_rate, size=n_steps)
        step = np.repeat(np.arange(n_steps), per_step)
        chunks.append((step, rng.integers(0, width, len(step)), rng.integers(0, height, len(step)),
                       rng.integers(0, 2, len(step))))

    if not chunks:
        return EventStream(width, height, np.empty(0, dtype=EVENT_DTYPE), meta)
    step = np.concatenate([c[0] for c in chunks]).astype(np.int64)
    ev = np.empty(len(step), dtype=EVENT_DTYPE)
    t = step * 1000 + rng.integers(0, 1000, len(step))
    ev["t"] = np.minimum(t, max(horizon_us - 1, 0))
    ev["x"] = np.concatenate([c[1] for c in chunks])
    ev["y"] = np.concatenate([c[2] for c in chunks])
    ev["p"] = np.concatenate([c[3] for c in chunks])
    ev = ev[np.argsort(ev["t"], kind="stable")]
    return EventStream(width, height, ev, meta)


def user_variant(archetype: GestureArchetype, rng: np.random.Generator,
                 speed_jitter: float = 0.15, size_jitter: float = 0.25) -> GestureArchetype:
    """Per-user style: slightly different speed and stroke size."""
    return replace(archetype,
                   angular_velocity=archetype.angular_velocity * (1 + rng.uniform(-speed_jitter, speed_jitter)),
                   size=archetype.size - rng.uniform(0, size_jitter))


def lighting_variant(archetype: GestureArchetype, gain: float, noise: float) -> GestureArchetype:
    return replace(archetype, event_rate=archetype.event_rate * gain, noise_rate=noise)
