"""Softmax-assignment k-means objective.

A model holds one hyperplane per cluster, ``z_ij = W_j . x_i + b_j``, and
scores each sample against every cluster with the cost

    c_ij = (beta_i - z_ij) / alpha,    beta_i = alpha * ||x_i||^2

weighted by the row-wise softmax of the logits. When ``W = 2 alpha Omega``
and ``b_j = -alpha ||Omega_j||^2`` the cost is exactly the squared distance
``||x_i - Omega_j||^2`` and the loss is a soft k-means cost; training then
moves ``W`` and ``b`` independently.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError


def as_data(X) -> np.ndarray:
    """Return ``X`` as a finite float64 matrix of shape (n, d)."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
        raise ShapeError(f"data must be a non-empty (n, d) matrix, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("data contains non-finite entries")
    return X


@dataclass
class ClusterModel:
    W: np.ndarray
    b: np.ndarray
    alpha: float

    def __post_init__(self):
        self.W = np.array(self.W, dtype=np.float64, ndmin=2)
        self.b = np.array(self.b, dtype=np.float64).reshape(-1)
        self.alpha = float(self.alpha)
        if not self.alpha > 0 or not np.isfinite(self.alpha):
            raise ValueError(f"alpha must be > 0, got {self.alpha}")
        if self.W.ndim != 2 or self.b.shape != (self.W.shape[0],):
            raise ShapeError(f"W {self.W.shape} and b {self.b.shape} disagree on k")
        if not (np.all(np.isfinite(self.W)) and np.all(np.isfinite(self.b))):
            raise ValueError("model parameters must be finite")

    @property
    def k(self) -> int:
        return self.W.shape[0]

    @property
    def d(self) -> int:
        return self.W.shape[1]

    @classmethod
    def from_centroids(cls, omega, alpha: float) -> "ClusterModel":
        W, b = centroids_to_params(omega, alpha)
        return cls(W, b, alpha)

    def copy(self) -> "ClusterModel":
        return ClusterModel(self.W.copy(), self.b.copy(), self.alpha)


@dataclass
class LossBreakdown:
    total: float
    per_sample: np.ndarray
    logits: np.ndarray
    costs: np.ndarray
    assignment: np.ndarray


@dataclass
class Gradients:
    dW: np.ndarray
    db: np.ndarray

    def norm(self) -> float:
        """Euclidean norm over the concatenated (dW, db)."""
        return float(np.sqrt(np.sum(self.dW**2) + np.sum(self.db**2)))


def _check_dims(model: ClusterModel, X: np.ndarray) -> np.ndarray:
    X = as_data(X)
    if X.shape[1] != model.d:
        raise ShapeError(f"data has d={X.shape[1]} but model expects d={model.d}")
    return X


def logits(model: ClusterModel, X) -> np.ndarray:
    X = _check_dims(model, X)
    return X @ model.W.T + model.b


def soft_assign(Z) -> np.ndarray:
    """Row-wise softmax with max-shift, so logits of any finite size are safe."""
    Z = np.asarray(Z, dtype=np.float64)
    shifted = Z - Z.max(axis=-1, keepdims=True)
    E = np.exp(shifted)
    return E / E.sum(axis=-1, keepdims=True)


def hard_assign(I) -> np.ndarray:
    # np.argmax returns the first maximum, i.e. ties go to the lowest index
    return np.argmax(np.asarray(I), axis=-1)


def beta(X, alpha: float) -> np.ndarray:
    X = as_data(X)
    return alpha * np.einsum("ij,ij->i", X, X)


def loss(model: ClusterModel, X) -> LossBreakdown:
    X = _check_dims(model, X)
    Z = X @ model.W.T + model.b
    I = soft_assign(Z)
    bx = beta(X, model.alpha)
    C = (bx[:, None] - Z) / model.alpha
    # sum_j I_ij c_ij with beta_i taken outside the weighted sum (rows of I sum to 1)
    per_sample = (bx - np.sum(I * Z, axis=1)) / model.alpha
    return LossBreakdown(float(np.sum(per_sample)), per_sample, Z, C, I)


def _logit_grad(I: np.ndarray, Z: np.ndarray, alpha: float) -> np.ndarray:
    # dL/dz_ij = I_ij (c_ij - l_i - 1/alpha); beta cancels in c_ij - l_i
    f = np.sum(I * Z, axis=1, keepdims=True)
    return I * ((f - Z) - 1.0) / alpha


def gradients(model: ClusterModel, X, include_beta: bool = False) -> Gradients:
    """Analytic gradient of the loss with respect to ``W`` and ``b``.

    ``W`` and ``b`` get separate gradients. ``beta`` is constant in the
    parameters and is dropped by default; ``include_beta=True`` routes the
    computation through the full costs instead, which must give the same
    result up to rounding.
    """
    X = _check_dims(model, X)
    if include_beta:
        lb = loss(model, X)
        G = lb.assignment * (lb.costs - lb.per_sample[:, None] - 1.0 / model.alpha)
    else:
        Z = X @ model.W.T + model.b
        G = _logit_grad(soft_assign(Z), Z, model.alpha)
    return Gradients(G.T @ X, G.sum(axis=0))


def loss_and_gradients(model: ClusterModel, X) -> tuple[LossBreakdown, Gradients]:
    X = _check_dims(model, X)
    lb = loss(model, X)
    G = _logit_grad(lb.assignment, lb.logits, model.alpha)
    return lb, Gradients(G.T @ X, G.sum(axis=0))


def centroids_to_params(omega, alpha: float) -> tuple[np.ndarray, np.ndarray]:
    if not alpha > 0:
        raise ValueError(f"alpha must be > 0, got {alpha}")
    omega = np.array(omega, dtype=np.float64, ndmin=2)
    if not np.all(np.isfinite(omega)):
        raise ValueError("centroids must be finite")
    W = 2.0 * alpha * omega
    b = -alpha * np.einsum("ij,ij->i", omega, omega)
    return W, b


def recover_centers(model: ClusterModel) -> np.ndarray:
    return model.W / (2.0 * model.alpha)
