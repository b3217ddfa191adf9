"""Lloyd's algorithm, the vanilla k-means baseline."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .core import as_data
from .errors import CapacityError, ShapeError

log = logging.getLogger(__name__)


@dataclass
class LloydResult:
    labels: np.ndarray
    centroids: np.ndarray
    inertia: float
    iterations: int
    history: list[float] = field(default_factory=list)
    reseeded: list[bool] = field(default_factory=list)


def sq_distances(X: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """(n, k) matrix of squared Euclidean distances, computed by explicit differences."""
    diff = X[:, None, :] - centroids[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def inertia(X, labels, centroids) -> float:
    X = as_data(X)
    centroids = np.array(centroids, dtype=np.float64, ndmin=2)
    labels = np.asarray(labels)
    if labels.shape != (X.shape[0],):
        raise ShapeError(f"expected {X.shape[0]} labels, got shape {labels.shape}")
    if labels.size and (labels.min() < 0 or labels.max() >= len(centroids)):
        raise ValueError(f"labels must lie in [0, {len(centroids)})")
    diff = X - centroids[labels]
    return float(np.sum(diff * diff))


def _assign(D: np.ndarray, previous: np.ndarray | None) -> np.ndarray:
    labels = np.argmin(D, axis=1)
    if previous is not None:
        # keep the current label on exact ties so a point never moves for free
        rows = np.arange(len(D))
        keep = D[rows, previous] <= D[rows, labels]
        labels = np.where(keep, previous, labels)
    return labels


def _update(X, labels, centroids, k):
    """Means of each cluster; empty clusters take the farthest points."""
    new = centroids.copy()
    counts = np.bincount(labels, minlength=k)
    for j in range(k):
        if counts[j]:
            new[j] = X[labels == j].mean(axis=0)
    empty = np.flatnonzero(counts == 0)
    if empty.size == 0:
        return new, labels, False
    labels = labels.copy()
    dist = np.einsum("ij,ij->i", X - new[labels], X - new[labels])
    taken = set()
    for j in empty:
        order = np.argsort(-dist, kind="stable")
        i = next(i for i in order if i not in taken)
        taken.add(i)
        log.info("cluster %d empty; re-seeded at sample %d", j, i)
        labels[i] = j
        dist[i] = 0.0
    for j in range(k):
        members = labels == j
        # a donor singleton can only empty out when the data has < k distinct rows
        if members.any():
            new[j] = X[members].mean(axis=0)
    return new, labels, True


def lloyd(X, k: int, init, max_iter: int = 300, tol: float = 1e-4) -> LloydResult:
    """Alternate nearest-center assignment and mean updates.

    Stops once no center moves by ``tol`` or more (max over centers of the
    Euclidean displacement), or after ``max_iter`` iterations. An empty
    cluster is re-seeded at the point farthest from its assigned center;
    those iterations are flagged in ``reseeded``.
    """
    X = as_data(X)
    n = X.shape[0]
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    if k > n:
        raise CapacityError(f"k={k} exceeds the number of samples n={n}")
    centroids = np.array(init, dtype=np.float64, ndmin=2)
    if centroids.shape != (k, X.shape[1]):
        raise ShapeError(f"init must have shape {(k, X.shape[1])}, got {centroids.shape}")

    labels = None
    history, reseeded = [], []
    it = 0
    for it in range(1, max_iter + 1):
        labels = _assign(sq_distances(X, centroids), labels)
        new, labels, was_reseeded = _update(X, labels, centroids, k)
        shift = np.max(np.linalg.norm(new - centroids, axis=1))
        centroids = new
        history.append(inertia(X, labels, centroids))
        reseeded.append(was_reseeded)
        if shift < tol and not was_reseeded:
            break
    return LloydResult(labels, centroids, history[-1], it, history, reseeded)
