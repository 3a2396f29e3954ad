"""Binary container for named float64 parameter arrays.

Layout (little-endian): magic ``LFCK``, format version u32, entry count u32,
then per entry: name length u32, utf-8 name, ndim u32, each extent u32,
row-major float64 payload.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"LFCK"
VERSION = 1


class CheckpointError(ValueError):
    """Unreadable container: wrong magic, version, or truncated payload."""


def save_params(path: str | Path, named: list[tuple[str, np.ndarray]]) -> None:
    chunks = [MAGIC, struct.pack("<II", VERSION, len(named))]
    for name, arr in named:
        arr = np.ascontiguousarray(arr, dtype=np.float64)
        raw = name.encode("utf-8")
        chunks.append(struct.pack("<I", len(raw)))
        chunks.append(raw)
        chunks.append(struct.pack("<I", arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        chunks.append(arr.astype("<f8").tobytes())
    Path(path).write_bytes(b"".join(chunks))


def load_params(path: str | Path) -> dict[str, np.ndarray]:
    blob = Path(path).read_bytes()
    if blob[:4] != MAGIC:
        raise CheckpointError(f"{path}: bad magic {blob[:4]!r}, expected {MAGIC!r}")
    version, count = struct.unpack_from("<II", blob, 4)
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported container version {version}")
    out: dict[str, np.ndarray] = {}
    pos = 12
    try:
        for _ in range(count):
            (name_len,) = struct.unpack_from("<I", blob, pos)
            pos += 4
            name = blob[pos:pos + name_len].decode("utf-8")
            pos += name_len
            (ndim,) = struct.unpack_from("<I", blob, pos)
            pos += 4
            shape = struct.unpack_from(f"<{ndim}I", blob, pos)
            pos += 4 * ndim
            n = int(np.prod(shape)) if ndim else 1
            arr = np.frombuffer(blob, dtype="<f8", count=n, offset=pos).reshape(shape)
            pos += 8 * n
            if len(blob) < pos:
                raise struct.error("short read")
            out[name] = arr.astype(np.float64)
    except (struct.error, ValueError) as e:
        raise CheckpointError(f"{path}: truncated container ({e})") from e
    if pos != len(blob):
        raise CheckpointError(f"{path}: {len(blob) - pos} trailing bytes")
    return out
