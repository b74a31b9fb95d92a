"""Binary weight files: the transfer-learning and checkpoint interchange format.

Layout (all little-endian):

    magic   4 bytes  "ODSW"
    version u16      currently 1
    count   u32      number of tensor records
    record  name_len u16, name utf-8 bytes, rank u8, dims u32 * rank,
            raw float32 data (row-major)

Round trips are bitwise: save(load(f)) == f byte for byte.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"ODSW"
VERSION = 1


class WeightFormatError(ValueError):
    """The file is not a valid weight file."""


def save_weights(tensors: dict[str, np.ndarray], path) -> None:
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<HI", VERSION, len(tensors)))
        for name, arr in tensors.items():
            data = np.ascontiguousarray(arr, dtype="<f4")
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<B", data.ndim))
            fh.write(struct.pack(f"<{data.ndim}I", *data.shape))
            fh.write(data.tobytes())


def _read_exact(fh, n: int) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise WeightFormatError(f"truncated weight file: wanted {n} bytes, got {len(data)}")
    return data


def load_weights(path) -> dict[str, np.ndarray]:
    path = Path(path)
    tensors: dict[str, np.ndarray] = {}
    with open(path, "rb") as fh:
        if _read_exact(fh, 4) != MAGIC:
            raise WeightFormatError(f"bad magic in {path}")
        version, count = struct.unpack("<HI", _read_exact(fh, 6))
        if version != VERSION:
            raise WeightFormatError(f"unsupported weight file version {version}")
        for _ in range(count):
            (name_len,) = struct.unpack("<H", _read_exact(fh, 2))
            name = _read_exact(fh, name_len).decode("utf-8")
            (rank,) = struct.unpack("<B", _read_exact(fh, 1))
            dims = struct.unpack(f"<{rank}I", _read_exact(fh, 4 * rank))
            n = 1
            for d in dims:
                n *= d
            raw = _read_exact(fh, 4 * n)
            tensors[name] = np.frombuffer(raw, dtype="<f4").reshape(dims).copy()
        trailing = fh.read(1)
        if trailing:
            raise WeightFormatError(f"trailing bytes after {count} tensor records in {path}")
    return tensors
