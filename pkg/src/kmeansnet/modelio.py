"""Binary model container.

Layout (all little-endian)::

    offset  size   field
    0       4      magic b"KMNT"
    4       2      format version (uint16, currently 1)
    6       2      flags (uint16; bit 0 = trained on l2-normalized rows)
    8       4      k (uint32)
    12      4      d (uint32)
    16      8      alpha (float64)
    24      8*k*d  W, row-major, one row per cluster (float64)
    ...     8*k    b (float64)
"""

from __future__ import annotations

import struct

import numpy as np

from .core import ClusterModel

MAGIC = b"KMNT"
VERSION = 1
_HEADER = struct.Struct("<4sHHIId")


def save_model(path, model: ClusterModel, normalized: bool = False) -> None:
    header = _HEADER.pack(MAGIC, VERSION, int(bool(normalized)), model.k, model.d, model.alpha)
    with open(path, "wb") as f:
        f.write(header)
        f.write(model.W.astype("<f8").tobytes(order="C"))
        f.write(model.b.astype("<f8").tobytes())


def load_model(path) -> tuple[ClusterModel, bool]:
    """Return (model, normalized flag)."""
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: truncated model header")
    magic, version, flags, k, d, alpha = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ValueError(f"{path}: not a model file (magic {magic!r})")
    if version != VERSION:
        raise ValueError(f"{path}: unsupported model format version {version}")
    expected = _HEADER.size + 8 * (k * d + k)
    if len(raw) != expected:
        raise ValueError(f"{path}: expected {expected} bytes, found {len(raw)}")
    body = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    W = body[: k * d].reshape(k, d).astype(np.float64)
    b = body[k * d:].astype(np.float64)
    return ClusterModel(W, b, alpha), bool(flags & 1)
