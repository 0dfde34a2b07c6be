"""Binary checkpoint format.

Layout (all integers little-endian)::

    b"GDNN1"
    u32 header_len, header_len bytes of UTF-8 JSON (model spec and metadata)
    u32 tensor_count
    per tensor: u32 name_len, name (UTF-8), u32 rank, rank x u64 dims,
                prod(dims) x float64 values (C order)
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..errors import DataError

MAGIC = b"GDNN1"


def encode_checkpoint(tensors: dict[str, np.ndarray], header: dict | None = None) -> bytes:
    head = json.dumps(header or {}, sort_keys=True, separators=(",", ":")).encode("utf-8")
    parts = [MAGIC, struct.pack("<I", len(head)), head, struct.pack("<I", len(tensors))]
    for name, value in tensors.items():
        arr = np.asarray(value, dtype="<f8", order="C")
        raw = name.encode("utf-8")
        parts.append(struct.pack("<I", len(raw)))
        parts.append(raw)
        parts.append(struct.pack("<I", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        parts.append(arr.tobytes())
    return b"".join(parts)


def decode_checkpoint(blob: bytes) -> tuple[dict[str, np.ndarray], dict]:
    if blob[: len(MAGIC)] != MAGIC:
        raise DataError("not a GDNN1 checkpoint (bad magic)")
    pos = len(MAGIC)

    def take(fmt: str):
        nonlocal pos
        size = struct.calcsize(fmt)
        if pos + size > len(blob):
            raise DataError("truncated checkpoint")
        out = struct.unpack_from(fmt, blob, pos)
        pos += size
        return out

    (hlen,) = take("<I")
    header = json.loads(blob[pos : pos + hlen].decode("utf-8"))
    pos += hlen
    (count,) = take("<I")
    tensors = {}
    for _ in range(count):
        (nlen,) = take("<I")
        name = blob[pos : pos + nlen].decode("utf-8")
        pos += nlen
        (rank,) = take("<I")
        dims = take(f"<{rank}Q") if rank else ()
        n = int(np.prod(dims)) if rank else 1
        if pos + 8 * n > len(blob):
            raise DataError(f"truncated checkpoint in tensor {name!r}")
        arr = np.frombuffer(blob, dtype="<f8", count=n, offset=pos).reshape(dims).astype(np.float64)
        pos += 8 * n
        tensors[name] = arr
    if pos != len(blob):
        raise DataError("trailing bytes after checkpoint tensors")
    return tensors, header


def save_checkpoint(path, tensors: dict[str, np.ndarray], header: dict | None = None) -> None:
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(encode_checkpoint(tensors, header))
    tmp.replace(path)


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"checkpoint not found: {path}")
    return decode_checkpoint(path.read_bytes())
