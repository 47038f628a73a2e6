"""Named-tensor archive: a tiny versioned binary format for parameter
checkpoints.  Layout (little-endian):

    magic b"NTAR" | u32 version | u32 count
    per tensor: u16 name length | name utf-8 | u8 ndim | u32 dims... | f64 data

Writes are atomic (temp file + rename) and byte-deterministic for a given
mapping, so identical runs produce identical checkpoint files.
"""

from __future__ import annotations

import os
import struct
import tempfile

import numpy as np

MAGIC = b"NTAR"
VERSION = 1


def tensors_to_bytes(named: dict[str, np.ndarray]) -> bytes:
    parts = [MAGIC, struct.pack("<II", VERSION, len(named))]
    for name in named:
        arr = np.ascontiguousarray(named[name], dtype=np.float64)
        encoded = name.encode("utf-8")
        parts.append(struct.pack("<H", len(encoded)))
        parts.append(encoded)
        parts.append(struct.pack("<B", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(arr.astype("<f8").tobytes())
    return b"".join(parts)


def tensors_from_bytes(blob: bytes) -> dict[str, np.ndarray]:
    if blob[:4] != MAGIC:
        raise ValueError("not a named-tensor archive")
    version, count = struct.unpack_from("<II", blob, 4)
    if version != VERSION:
        raise ValueError(f"unsupported archive version {version}")
    offset = 12
    out: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack_from("<H", blob, offset)
        offset += 2
        name = blob[offset:offset + name_len].decode("utf-8")
        offset += name_len
        (ndim,) = struct.unpack_from("<B", blob, offset)
        offset += 1
        dims = struct.unpack_from(f"<{ndim}I", blob, offset)
        offset += 4 * ndim
        size = int(np.prod(dims)) if ndim else 1
        arr = np.frombuffer(blob, dtype="<f8", count=size, offset=offset).reshape(dims)
        offset += 8 * size
        out[name] = arr.astype(np.float64)
    if offset != len(blob):
        raise ValueError("trailing bytes after last tensor")
    return out


def write_bytes_atomic(path: str | os.PathLike, data: bytes) -> None:
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_tensors(path: str | os.PathLike, named: dict[str, np.ndarray]) -> None:
    write_bytes_atomic(path, tensors_to_bytes(named))


def load_tensors(path: str | os.PathLike) -> dict[str, np.ndarray]:
    with open(path, "rb") as f:
        return tensors_from_bytes(f.read())
