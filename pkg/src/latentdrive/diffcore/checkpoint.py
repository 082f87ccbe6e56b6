"""Flat binary archive for checkpoints: name -> (dtype, shape, raw bytes).

Layout (all integers little-endian):

    magic   4 bytes  b"LDCK"
    version u32
    mlen    u32      length of the UTF-8 JSON metadata blob
    meta    mlen bytes
    count   u32      number of array entries
    entry*  nlen u16, name (UTF-8), dtype tag u8, ndim u8, dims u32 each,
            payload (raw little-endian values)

Round-trips are bit-exact; readers reject bad magic, unknown versions, and
truncated files with ``CheckpointError``.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"LDCK"
VERSION = 1

_DTYPE_TAGS = {0: "<f8", 1: "<f4", 2: "u1", 3: "<i8"}
_TAG_FOR_KIND = {
    np.dtype(np.float64): 0,
    np.dtype(np.float32): 1,
    np.dtype(np.uint8): 2,
    np.dtype(np.int64): 3,
}


class CheckpointError(ValueError):
    pass


def save_archive(path, arrays: dict, meta: dict) -> None:
    path = Path(path)
    meta_blob = json.dumps(meta, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", VERSION))
        f.write(struct.pack("<I", len(meta_blob)))
        f.write(meta_blob)
        f.write(struct.pack("<I", len(arrays)))
        for name, arr in arrays.items():
            arr = np.asarray(arr)
            tag = _TAG_FOR_KIND.get(arr.dtype)
            if tag is None:
                raise CheckpointError(f"unsupported dtype {arr.dtype} for '{name}'")
            encoded = name.encode("utf-8")
            f.write(struct.pack("<H", len(encoded)))
            f.write(encoded)
            f.write(struct.pack("<BB", tag, arr.ndim))
            for dim in arr.shape:
                f.write(struct.pack("<I", dim))
            f.write(np.ascontiguousarray(arr, dtype=_DTYPE_TAGS[tag]).tobytes())


def _read_exact(f, n: int, what: str) -> bytes:
    buf = f.read(n)
    if len(buf) != n:
        raise CheckpointError(f"truncated archive while reading {what}")
    return buf


def load_archive(path):
    """Returns (arrays, meta). Raises CheckpointError on malformed input."""
    path = Path(path)
    with open(path, "rb") as f:
        if _read_exact(f, 4, "magic") != MAGIC:
            raise CheckpointError(f"bad magic in {path}: not a checkpoint archive")
        (version,) = struct.unpack("<I", _read_exact(f, 4, "version"))
        if version != VERSION:
            raise CheckpointError(f"unsupported archive version {version}")
        (mlen,) = struct.unpack("<I", _read_exact(f, 4, "metadata length"))
        meta = json.loads(_read_exact(f, mlen, "metadata").decode("utf-8"))
        (count,) = struct.unpack("<I", _read_exact(f, 4, "entry count"))
        arrays = {}
        for _ in range(count):
            (nlen,) = struct.unpack("<H", _read_exact(f, 2, "name length"))
            name = _read_exact(f, nlen, "name").decode("utf-8")
            tag, ndim = struct.unpack("<BB", _read_exact(f, 2, "entry header"))
            if tag not in _DTYPE_TAGS:
                raise CheckpointError(f"unknown dtype tag {tag} for '{name}'")
            shape = tuple(
                struct.unpack("<I", _read_exact(f, 4, "dims"))[0] for _ in range(ndim)
            )
            dtype = np.dtype(_DTYPE_TAGS[tag])
            nbytes = dtype.itemsize * int(np.prod(shape, dtype=np.int64)) if ndim else dtype.itemsize
            payload = _read_exact(f, nbytes, f"payload of '{name}'")
            arrays[name] = np.frombuffer(payload, dtype=dtype).reshape(shape).copy()
        if f.read(1):
            raise CheckpointError("trailing bytes after final entry")
    return arrays, meta


def save_model(path, model, meta: dict, extra_arrays: dict | None = None) -> None:
    """Persist a module tree's parameters (plus optional extra arrays)."""
    arrays = {name: p.data for name, p in model.named_parameters()}
    if extra_arrays:
        overlap = set(arrays) & set(extra_arrays)
        if overlap:
            raise CheckpointError(f"extra arrays collide with parameters: {sorted(overlap)}")
        arrays.update(extra_arrays)
    save_archive(path, arrays, meta)


def load_model(path, model):
    """Restore parameters in place; returns (meta, non-parameter arrays).

    Name or shape mismatches against the instantiated model raise
    ``CheckpointError`` (checkpoint/config incompatibility).
    """
    arrays, meta = load_archive(path)
    extras = dict(arrays)
    for name, p in model.named_parameters():
        if name not in extras:
            raise CheckpointError(f"checkpoint missing parameter '{name}'")
        stored = extras.pop(name)
        if stored.shape != p.data.shape:
            raise CheckpointError(
                f"shape mismatch for '{name}': checkpoint {stored.shape}, model {p.data.shape}"
            )
        p.data = stored.astype(p.data.dtype, copy=True)
    return meta, extras
