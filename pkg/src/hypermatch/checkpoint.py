"""Checkpoint file format: header plus named f64 tensor records.

Layout, all little-endian: magic "HMCK", format version u32, a 32-byte
hash of the model-shape configuration, the step counter u64, then for
each tensor a record of name length u32, utf-8 name bytes, rank u32,
one u64 extent per axis, and the f64 values row-major. Optimizer
moments ride along as ordinary named records.
"""

from __future__ import annotations

import hashlib
import json
import struct

import numpy as np

MAGIC = b"HMCK"
VERSION = 1
_HEAD = struct.Struct("<4sI32sQ")
_U32 = struct.Struct("<I")
_U64 = struct.Struct("<Q")


class CheckpointError(ValueError):
    """Unreadable or mismatched checkpoint file."""


def config_hash(fields: dict) -> bytes:
    """32-byte digest of the scoring-relevant config fields."""
    canon = json.dumps(fields, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).digest()


def save_checkpoint(path, step: int, cfg_hash: bytes,
                    tensors: dict[str, np.ndarray]) -> None:
    if len(cfg_hash) != 32:
        raise ValueError("config hash must be 32 bytes")
    with open(path, "wb") as fh:
        fh.write(_HEAD.pack(MAGIC, VERSION, cfg_hash, step))
        for name, arr in tensors.items():
            arr = np.asarray(arr, dtype=np.float64)
            encoded = name.encode("utf-8")
            fh.write(_U32.pack(len(encoded)))
            fh.write(encoded)
            fh.write(_U32.pack(arr.ndim))
            for extent in arr.shape:
                fh.write(_U64.pack(extent))
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_checkpoint(path) -> tuple[int, bytes, dict[str, np.ndarray]]:
    """Returns (step, config hash, tensors by name)."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEAD.size:
        raise CheckpointError(f"{path}: file shorter than header")
    magic, version, cfg_hash, step = _HEAD.unpack_from(raw, 0)
    if magic != MAGIC:
        raise CheckpointError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported version {version}")
    pos = _HEAD.size
    tensors: dict[str, np.ndarray] = {}
    while pos < len(raw):
        try:
            (name_len,) = _U32.unpack_from(raw, pos)
            pos += _U32.size
            name = raw[pos:pos + name_len].decode("utf-8")
            if len(raw) < pos + name_len:
                raise CheckpointError(f"{path}: truncated record name")
            pos += name_len
            (rank,) = _U32.unpack_from(raw, pos)
            pos += _U32.size
            shape = []
            for _ in range(rank):
                (extent,) = _U64.unpack_from(raw, pos)
                pos += _U64.size
                shape.append(extent)
            count = int(np.prod(shape)) if shape else 1
            end = pos + count * 8
            if end > len(raw):
                raise CheckpointError(f"{path}: truncated values for '{name}'")
            if name in tensors:
                raise CheckpointError(f"{path}: duplicate tensor '{name}'")
            values = np.frombuffer(raw, dtype="<f8", count=count, offset=pos)
            tensors[name] = values.reshape(shape).astype(np.float64)
            pos = end
        except struct.error as e:
            raise CheckpointError(f"{path}: truncated record ({e})") from e
    return step, cfg_hash, tensors
