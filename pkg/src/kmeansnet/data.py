"""Dataset ingestion and synthetic data."""

from __future__ import annotations

import csv
import gzip
import logging
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._rng import DATA, make_rng
from .errors import CapacityError, IDXFormatError

log = logging.getLogger(__name__)

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


@dataclass
class LabeledDataset:
    features: np.ndarray
    labels: np.ndarray | None = None
    source: str = ""
    normalized: bool = False
    centers: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    @property
    def n_classes(self) -> int | None:
        return None if self.labels is None else int(self.labels.max()) + 1


def encode_labels(raw) -> np.ndarray:
    """Dense integer codes in order of first appearance."""
    codes: dict = {}
    return np.array([codes.setdefault(v, len(codes)) for v in raw], dtype=np.int64)


def _open(path):
    path = Path(path)
    return gzip.open(path, "rb") if path.suffix == ".gz" else open(path, "rb")


def read_idx(path, expected_magic: int) -> np.ndarray:
    """Parse an unsigned-byte IDX file into an array of its stated dimensions."""
    with _open(path) as f:
        raw = f.read()
    if len(raw) < 4:
        raise IDXFormatError(f"{path}: truncated header ({len(raw)} bytes)")
    magic = struct.unpack(">I", raw[:4])[0]
    if magic != expected_magic:
        raise IDXFormatError(
            f"{path}: bad magic, expected 0x{expected_magic:08x}, found 0x{magic:08x}")
    ndim = magic & 0xFF
    header = 4 + 4 * ndim
    if len(raw) < header:
        raise IDXFormatError(f"{path}: truncated header ({len(raw)} of {header} bytes)")
    dims = struct.unpack(f">{ndim}I", raw[4:header])
    size = int(np.prod(dims))
    if len(raw) - header < size:
        raise IDXFormatError(f"{path}: truncated payload, expected {size} bytes, "
                             f"found {len(raw) - header}")
    if len(raw) - header > size:
        raise IDXFormatError(f"{path}: {len(raw) - header - size} trailing bytes after payload")
    return np.frombuffer(raw, dtype=np.uint8, offset=header).reshape(dims)


def write_idx(path, array) -> None:
    array = np.asarray(array, dtype=np.uint8)
    magic = 0x00000800 | array.ndim
    with open(path, "wb") as f:
        f.write(struct.pack(f">I{array.ndim}I", magic, *array.shape))
        f.write(array.tobytes(order="C"))


def load_idx(images_path, labels_path=None) -> LabeledDataset:
    """Load IDX images (scaled to [0, 1] and flattened row-major) and optional labels."""
    images = read_idx(images_path, IDX_IMAGES_MAGIC)
    features = images.reshape(images.shape[0], -1).astype(np.float64) / 255.0
    labels = None
    if labels_path is not None:
        raw = read_idx(labels_path, IDX_LABELS_MAGIC)
        if raw.shape[0] != features.shape[0]:
            raise IDXFormatError(f"{images_path} holds {features.shape[0]} images but "
                                 f"{labels_path} holds {raw.shape[0]} labels")
        labels = raw.astype(np.int64)
    return LabeledDataset(features, labels, source=str(images_path))


def concat(datasets: list[LabeledDataset]) -> LabeledDataset:
    features = np.concatenate([ds.features for ds in datasets])
    if any(ds.labels is None for ds in datasets):
        labels = None
    else:
        labels = encode_labels(np.concatenate([ds.labels for ds in datasets]))
    return LabeledDataset(features, labels, "+".join(ds.source for ds in datasets))


def load_csv(path, has_labels: bool = False, delimiter: str = ",") -> LabeledDataset:
    rows, raw_labels = [], []
    width = None
    with open(path, newline="") as f:
        reader = csv.reader(f, delimiter=delimiter, quoting=csv.QUOTE_NONE)
        for r, row in enumerate(reader):
            if not row or all(not cell.strip() for cell in row):
                continue
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise ValueError(f"{path}: row {r} has {len(row)} fields, expected {width}")
            cells = row[:-1] if has_labels else row
            try:
                values = [float(c) for c in cells]
            except ValueError:
                col = next(c for c, cell in enumerate(cells) if not _is_float(cell))
                raise ValueError(f"{path}: non-numeric value {cells[col]!r} "
                                 f"at row {r}, column {col}") from None
            rows.append(values)
            if has_labels:
                raw_labels.append(row[-1].strip())
    if not rows or not rows[0]:
        raise ValueError(f"{path}: no feature columns")
    labels = encode_labels(raw_labels) if has_labels else None
    return LabeledDataset(np.array(rows, dtype=np.float64), labels, source=str(path))


def _is_float(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def normalize_l2(X) -> np.ndarray:
    """Scale every nonzero row to unit Euclidean norm; zero rows stay zero."""
    X = np.asarray(X, dtype=np.float64)
    norms = np.linalg.norm(X, axis=1)
    zero = norms == 0
    if zero.any():
        log.warning("%d zero rows left unnormalized", int(zero.sum()))
    out = X.copy()
    out[~zero] /= norms[~zero, None]
    return out


def make_blobs(k: int, per_cluster: int, d: int = 2, separation: float = 10.0,
               sigma: float = 0.5, seed: int = 0, max_tries: int = 10_000) -> LabeledDataset:
    """Isotropic Gaussian clusters whose centers are pairwise >= ``separation`` apart.

    Centers are drawn on a sphere of radius ``separation * max(1, k / 2)``
    around the origin, which keeps every cluster off the origin and at a
    distinct direction, so the clusters stay apart after row normalization.
    Points are grouped by cluster in label order.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    if sigma <= 0 or separation <= 0:
        raise ValueError("sigma and separation must be > 0")
    if d == 1 and k > 2:
        raise CapacityError("at most 2 separated centers fit on a 1-D sphere")
    rng = make_rng(seed, DATA)
    radius = separation * max(1.0, k / 2)
    for _ in range(max_tries):
        dirs = rng.standard_normal((k, d))
        centers = radius * dirs / np.linalg.norm(dirs, axis=1, keepdims=True)
        diff = centers[:, None, :] - centers[None, :, :]
        dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
        if np.min(dist[np.triu_indices(k, 1)]) >= separation:
            break
    else:
        raise CapacityError(f"could not place {k} centers {separation} apart in {max_tries} tries")
    labels = np.repeat(np.arange(k), per_cluster)
    features = centers[labels] + sigma * rng.standard_normal((k * per_cluster, d))
    src = f"blobs(k={k},per_cluster={per_cluster},d={d},sep={separation},sigma={sigma},seed={seed})"
    return LabeledDataset(features, labels, source=src, centers=centers)
