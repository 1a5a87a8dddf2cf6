"""Bit-exact parameter container: JSON header plus named float64 payloads.

Layout (all integers little-endian):
  magic  b"SLCP"
  u32    format version (currently 1)
  u32    header length, then that many bytes of canonical JSON
  u32    parameter count, then per parameter (sorted by name):
         u32 name length, name bytes, u32 ndim, u64 per dim,
         row-major float64 payload

Writes contain no timestamps or environment data, so identical inputs
produce identical files.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"SLCP"
VERSION = 1


def save_params(path: str | Path, header: dict, params: dict[str, np.ndarray]) -> None:
    blob = bytearray()
    blob += MAGIC
    blob += struct.pack("<I", VERSION)
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    blob += struct.pack("<I", len(header_bytes))
    blob += header_bytes
    blob += struct.pack("<I", len(params))
    for name in sorted(params):
        arr = np.ascontiguousarray(params[name], dtype="<f8")
        name_bytes = name.encode("utf-8")
        blob += struct.pack("<I", len(name_bytes))
        blob += name_bytes
        blob += struct.pack("<I", arr.ndim)
        for dim in arr.shape:
            blob += struct.pack("<Q", dim)
        blob += arr.tobytes(order="C")
    Path(path).write_bytes(bytes(blob))


def load_params(path: str | Path) -> tuple[dict, dict[str, np.ndarray]]:
    data = Path(path).read_bytes()
    if data[:4] != MAGIC:
        raise ValueError(f"{path}: not a parameter container (bad magic)")
    pos = 4
    (version,) = struct.unpack_from("<I", data, pos)
    pos += 4
    if version != VERSION:
        raise ValueError(f"{path}: unsupported container version {version}")
    (header_len,) = struct.unpack_from("<I", data, pos)
    pos += 4
    header = json.loads(data[pos : pos + header_len].decode("utf-8"))
    pos += header_len
    (count,) = struct.unpack_from("<I", data, pos)
    pos += 4
    params: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack_from("<I", data, pos)
        pos += 4
        name = data[pos : pos + name_len].decode("utf-8")
        pos += name_len
        (ndim,) = struct.unpack_from("<I", data, pos)
        pos += 4
        shape = struct.unpack_from(f"<{ndim}Q", data, pos)
        pos += 8 * ndim
        n_bytes = 8 * int(np.prod(shape, dtype=np.int64))
        arr = np.frombuffer(data[pos : pos + n_bytes], dtype="<f8").reshape(shape).copy()
        pos += n_bytes
        params[name] = arr
    return header, params
