"""Checkpoint container.

Layout (little-endian): b"CKP1" | u32 header length | UTF-8 JSON header |
raw tensor bytes concatenated in header order. The header holds the network
config and, per tensor, its name, dtype and shape.
"""

from __future__ import annotations

import json
import os
import struct
from pathlib import Path

import numpy as np

from .network import Network, NetworkConfig

MAGIC = b"CKP1"
_HEAD = struct.Struct("<4sI")


class CheckpointError(ValueError):
    pass


def encode_checkpoint(config: dict, tensors: dict[str, np.ndarray], extra: dict | None = None) -> bytes:
    index = []
    blobs = []
    for name in sorted(tensors):
        arr = np.ascontiguousarray(tensors[name])
        dt = arr.dtype.newbyteorder("<")
        index.append({"name": name, "dtype": dt.str, "shape": list(arr.shape)})
        blobs.append(arr.astype(dt, copy=False).tobytes())
    header = json.dumps({"config": config, "tensors": index, "extra": extra or {}},
                        sort_keys=True).encode()
    return _HEAD.pack(MAGIC, len(header)) + header + b"".join(blobs)


def decode_checkpoint(data: bytes) -> tuple[dict, dict[str, np.ndarray], dict]:
    if data[:4] != MAGIC:
        raise CheckpointError("bad magic")
    _, hlen = _HEAD.unpack_from(data)
    off = _HEAD.size
    header = json.loads(data[off:off + hlen])
    off += hlen
    tensors = {}
    for entry in header["tensors"]:
        dt = np.dtype(entry["dtype"])
        n = int(np.prod(entry["shape"])) if entry["shape"] else 1
        if off + n * dt.itemsize > len(data):
            raise CheckpointError("truncated payload")
        tensors[entry["name"]] = np.frombuffer(data, dtype=dt, count=n, offset=off).reshape(
            entry["shape"]).copy()
        off += n * dt.itemsize
    return header["config"], tensors, header.get("extra", {})


def save_checkpoint(net: Network, path: str | os.PathLike, extra: dict | None = None) -> None:
    Path(path).write_bytes(encode_checkpoint(net.cfg.to_dict(), net.state_dict(), extra))


def load_checkpoint(path: str | os.PathLike) -> tuple[Network, dict]:
    config, tensors, extra = decode_checkpoint(Path(path).read_bytes())
    net = Network(NetworkConfig.from_dict(config))
    net.load_state_dict(tensors)
    return net, extra
