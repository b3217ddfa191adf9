"""Cluster-center initializers: random rows, k-means++, and Lloyd-refined k-means++."""

from __future__ import annotations

from enum import Enum

import numpy as np

from ._rng import INIT, make_rng
from .baseline import lloyd
from .core import as_data
from .errors import CapacityError, DegeneracyError


class InitMethod(str, Enum):
    RANDOM = "random"
    KMEANS_PP = "kmeans++"
    KMEANS = "kmeans"

    @classmethod
    def parse(cls, name: "str | InitMethod") -> "InitMethod":
        if isinstance(name, cls):
            return name
        aliases = {"kmeans_pp": cls.KMEANS_PP, "kmeanspp": cls.KMEANS_PP, "k-means++": cls.KMEANS_PP,
                   "k-means": cls.KMEANS}
        key = str(name).lower()
        return aliases.get(key) or cls(key)


def _check_k(n: int, k: int) -> None:
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    if k > n:
        raise CapacityError(f"k={k} exceeds the number of samples n={n}")


def init_random(X, k: int, seed: int) -> np.ndarray:
    X = as_data(X)
    _check_k(len(X), k)
    rng = make_rng(seed, INIT)
    idx = rng.choice(len(X), size=k, replace=False)
    return X[idx].copy()


def init_kmeanspp(X, k: int, seed: int) -> np.ndarray:
    """D^2 seeding: first center uniform, then each next one drawn with
    probability proportional to the squared distance to the nearest chosen center."""
    X = as_data(X)
    n = len(X)
    _check_k(n, k)
    n_distinct = len(np.unique(X, axis=0))
    if n_distinct < k:
        raise DegeneracyError(f"only {n_distinct} distinct rows for k={k}")

    rng = make_rng(seed, INIT)
    chosen = [int(rng.integers(n))]
    diff = X - X[chosen[0]]
    d2 = np.einsum("ij,ij->i", diff, diff)
    for _ in range(1, k):
        cum = np.cumsum(d2)
        # side="right" never lands on a zero-weight row
        i = int(np.searchsorted(cum, rng.random() * cum[-1], side="right"))
        if i >= n:  # u * total rounded up to total
            i = int(np.flatnonzero(d2)[-1])
        chosen.append(i)
        diff = X - X[i]
        d2 = np.minimum(d2, np.einsum("ij,ij->i", diff, diff))
    return X[chosen].copy()


def init_kmeans(X, k: int, seed: int, max_iter: int = 300, tol: float = 1e-4) -> np.ndarray:
    X = as_data(X)
    return lloyd(X, k, init_kmeanspp(X, k, seed), max_iter=max_iter, tol=tol).centroids


def initialize(X, k: int, method: "str | InitMethod", seed: int) -> np.ndarray:
    method = InitMethod.parse(method)
    if method is InitMethod.RANDOM:
        return init_random(X, k, seed)
    if method is InitMethod.KMEANS_PP:
        return init_kmeanspp(X, k, seed)
    return init_kmeans(X, k, seed)
