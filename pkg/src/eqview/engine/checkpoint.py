"""Binary checkpoint format for named tensors.

Layout (all integers little-endian):

    magic   5 bytes  b"ERVC1"
    version u32      format version, currently 1
    count   u32      number of tensors
    per tensor:
        name_len u16, name UTF-8 bytes
        dtype    u8   (0 = float32, 1 = float64)
        rank     u8
        dims     rank x u64
        data     raw little-endian IEEE-754 values, row-major

Write then read is bit-exact.
"""

from __future__ import annotations

import struct

import numpy as np

MAGIC = b"ERVC1"
VERSION = 1

_DTYPE_CODES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
_CODES_BY_KIND = {"float32": 0, "float64": 1}


class BadCheckpoint(ValueError):
    """Raised on a malformed or truncated checkpoint."""


def dump_checkpoint(tensors: list[tuple[str, np.ndarray]]) -> bytes:
    parts = [MAGIC, struct.pack("<II", VERSION, len(tensors))]
    for name, arr in tensors:
        arr = np.asarray(arr)
        if arr.dtype.name not in _CODES_BY_KIND:
            raise BadCheckpoint(f"unsupported dtype {arr.dtype} for {name!r}")
        name_bytes = name.encode("utf-8")
        parts.append(struct.pack("<H", len(name_bytes)))
        parts.append(name_bytes)
        parts.append(struct.pack("<BB", _CODES_BY_KIND[arr.dtype.name], arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        code = _CODES_BY_KIND[arr.dtype.name]
        parts.append(np.ascontiguousarray(arr, dtype=_DTYPE_CODES[code]).tobytes())
    return b"".join(parts)


def load_checkpoint(data: bytes) -> list[tuple[str, np.ndarray]]:
    if data[:5] != MAGIC:
        raise BadCheckpoint(f"bad magic {data[:5]!r}")
    pos = 5

    def take(n: int, what: str) -> bytes:
        nonlocal pos
        if pos + n > len(data):
            raise BadCheckpoint(f"truncated {what}")
        chunk = data[pos:pos + n]
        pos += n
        return chunk

    version, count = struct.unpack("<II", take(8, "header"))
    if version != VERSION:
        raise BadCheckpoint(f"unsupported version {version}")
    tensors = []
    for _ in range(count):
        (name_len,) = struct.unpack("<H", take(2, "name length"))
        name = take(name_len, "name").decode("utf-8")
        code, rank = struct.unpack("<BB", take(2, "dtype/rank"))
        if code not in _DTYPE_CODES:
            raise BadCheckpoint(f"unknown dtype code {code}")
        dims = struct.unpack(f"<{rank}Q", take(8 * rank, "dims"))
        dtype = _DTYPE_CODES[code]
        nbytes = int(np.prod(dims, dtype=np.int64)) * dtype.itemsize if rank else dtype.itemsize
        raw = take(nbytes, f"data of {name!r}")
        arr = np.frombuffer(raw, dtype=dtype).reshape(dims).copy()
        tensors.append((name, arr.astype(arr.dtype.newbyteorder("="), copy=False)))
    if pos != len(data):
        raise BadCheckpoint(f"{len(data) - pos} trailing bytes")
    return tensors


def save_model(model, path: str) -> None:
    """Write a model's parameters and running state to a checkpoint file."""
    with open(path, "wb") as fh:
        fh.write(dump_checkpoint(model.state_tensors()))


def load_model(model, path: str) -> None:
    """Load named tensors into a model in place; names and shapes must match."""
    with open(path, "rb") as fh:
        tensors = load_checkpoint(fh.read())
    current = dict(model.state_tensors())
    loaded = dict(tensors)
    if set(loaded) != set(current):
        missing = sorted(set(current) - set(loaded))
        extra = sorted(set(loaded) - set(current))
        raise BadCheckpoint(f"tensor name mismatch: missing {missing}, extra {extra}")
    for name, arr in current.items():
        src = loaded[name]
        if src.shape != arr.shape:
            raise BadCheckpoint(
                f"{name}: checkpoint shape {src.shape} != model shape {arr.shape}"
            )
        arr[...] = src.astype(arr.dtype, copy=False)
