"""Binary and CSV codecs for events and frames.

EVB1:  b"EVB1" | u32 W | u32 H | u64 count | count * (u64 t, u16 x, u16 y, u8 p, u8 pad)
FRS1:  b"FRS1" | u32 T | u32 C | u32 H | u32 W | T*C*H*W float32, [t][c][h][w] order
CSV:   header ``t,x,y,p`` then one event per line

All integers little-endian.
"""

from __future__ import annotations

import io
import os
import struct
from pathlib import Path

import numpy as np

from .events import EVENT_DTYPE, EventStream, FrameSequence, StreamMeta

EVB_MAGIC = b"EVB1"
FRS_MAGIC = b"FRS1"
_EVB_HEADER = struct.Struct("<4sIIQ")
_FRS_HEADER = struct.Struct("<4sIIII")
_EVB_RECORD = np.dtype([("t", "<u8"), ("x", "<u2"), ("y", "<u2"), ("p", "u1"), ("pad", "u1")])


class EventFileError(ValueError):
    pass


class BadMagicError(EventFileError):
    pass


class TruncatedPayloadError(EventFileError):
    pass


class UnsortedTimestampsError(EventFileError):
    pass


class InvalidPolarityError(EventFileError):
    pass


class CoordinateRangeError(EventFileError):
    pass


def _check_events(ev: np.ndarray, width: int, height: int) -> None:
    if len(ev) == 0:
        return
    if ev["p"].max() > 1:
        raise InvalidPolarityError("invalid polarity")
    if np.any(ev["t"][1:] < ev["t"][:-1]):
        raise UnsortedTimestampsError("unsorted timestamps")
    if ev["x"].max() >= width or ev["y"].max() >= height:
        raise CoordinateRangeError("event coordinates outside sensor geometry")


def encode_evb(stream: EventStream) -> bytes:
    rec = np.zeros(len(stream), dtype=_EVB_RECORD)
    for name in ("t", "x", "y", "p"):
        rec[name] = stream.events[name]
    return _EVB_HEADER.pack(EVB_MAGIC, stream.width, stream.height, len(stream)) + rec.tobytes()


def decode_evb(data: bytes, meta: StreamMeta | None = None) -> EventStream:
    if len(data) < 4 or data[:4] != EVB_MAGIC:
        raise BadMagicError(f"bad magic: {data[:4]!r}")
    if len(data) < _EVB_HEADER.size:
        raise TruncatedPayloadError("truncated header")
    _, width, height, count = _EVB_HEADER.unpack_from(data)
    need = _EVB_HEADER.size + count * _EVB_RECORD.itemsize
    if len(data) < need:
        raise TruncatedPayloadError(f"truncated payload: expected {need} bytes, got {len(data)}")
    rec = np.frombuffer(data, dtype=_EVB_RECORD, count=count, offset=_EVB_HEADER.size)
    _check_events(rec, width, height)
    ev = np.empty(count, dtype=EVENT_DTYPE)
    for name in ("t", "x", "y", "p"):
        ev[name] = rec[name]
    return EventStream(width, height, ev, meta or StreamMeta())


def encode_csv(stream: EventStream) -> str:
    buf = io.StringIO()
    buf.write("t,x,y,p\n")
    for t, x, y, p in stream.events.tolist():
        buf.write(f"{t},{x},{y},{p}\n")
    return buf.getvalue()


def decode_csv(text: str, width: int | None = None, height: int | None = None,
               meta: StreamMeta | None = None) -> EventStream:
    """Parse CSV events. Geometry defaults to the smallest one containing all events."""
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0].replace(" ", "") != "t,x,y,p":
        raise BadMagicError("missing CSV header 't,x,y,p'")
    rows = []
    for lineno, ln in enumerate(lines[1:], start=2):
        parts = ln.split(",")
        if len(parts) != 4:
            raise TruncatedPayloadError(f"line {lineno}: expected 4 fields")
        try:
            t, x, y, p = (int(v) for v in parts)
        except ValueError as exc:
            raise EventFileError(f"line {lineno}: {exc}") from None
        if p not in (0, 1):
            raise InvalidPolarityError(f"invalid polarity {p} on line {lineno}")
        if t < 0 or x < 0 or y < 0:
            raise EventFileError(f"line {lineno}: negative field")
        rows.append((t, x, y, p))
    ev = np.array(rows, dtype=EVENT_DTYPE) if rows else np.empty(0, dtype=EVENT_DTYPE)
    if width is None:
        width = int(ev["x"].max()) + 1 if rows else 1
    if height is None:
        height = int(ev["y"].max()) + 1 if rows else 1
    _check_events(ev, width, height)
    return EventStream(width, height, ev, meta or StreamMeta())


def _is_csv(path: Path, fmt: str | None) -> bool:
    if fmt is not None:
        return fmt.lower() == "csv"
    return path.suffix.lower() == ".csv"


def write_events(stream: EventStream, path: str | os.PathLike, fmt: str | None = None) -> None:
    path = Path(path)
    if _is_csv(path, fmt):
        path.write_text(encode_csv(stream))
    else:
        path.write_bytes(encode_evb(stream))


def read_events(path: str | os.PathLike, fmt: str | None = None, **kwargs) -> EventStream:
    path = Path(path)
    if _is_csv(path, fmt):
        return decode_csv(path.read_text(), **kwargs)
    return decode_evb(path.read_bytes(), meta=kwargs.get("meta"))


def encode_frames(frames: FrameSequence | np.ndarray) -> bytes:
    values = frames.values if isinstance(frames, FrameSequence) else frames
    values = np.ascontiguousarray(values, dtype="<f4")
    if values.ndim != 4:
        raise ValueError("frames must be a T x C x H x W tensor")
    return _FRS_HEADER.pack(FRS_MAGIC, *values.shape) + values.tobytes()


def decode_frames(data: bytes, meta: dict | None = None) -> FrameSequence:
    if len(data) < 4 or data[:4] != FRS_MAGIC:
        raise BadMagicError(f"bad magic: {data[:4]!r}")
    if len(data) < _FRS_HEADER.size:
        raise TruncatedPayloadError("truncated header")
    _, T, C, H, W = _FRS_HEADER.unpack_from(data)
    n = T * C * H * W
    if len(data) < _FRS_HEADER.size + 4 * n:
        raise TruncatedPayloadError("truncated payload")
    values = np.frombuffer(data, dtype="<f4", count=n, offset=_FRS_HEADER.size)
    return FrameSequence(values.reshape(T, C, H, W).astype(np.float32), dict(meta or {}))


def write_frames(frames: FrameSequence | np.ndarray, path: str | os.PathLike) -> None:
    Path(path).write_bytes(encode_frames(frames))


def read_frames(path: str | os.PathLike) -> FrameSequence:
    return decode_frames(Path(path).read_bytes())
