"""Numerical checks of the gradient, its Lipschitz bound, and the SGD convergence bound."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from ._rng import AUDIT, make_rng
from .baseline import inertia
from .core import ClusterModel, as_data, centroids_to_params, gradients, loss, soft_assign
from .errors import CapacityError

log = logging.getLogger(__name__)

BRUTE_FORCE_LIMIT = 10**7


def _objective_ld(W, b, alpha, X) -> np.longdouble:
    """Loss minus its parameter-free beta term, evaluated in extended precision.

    Written out independently of ``core`` so that it can serve as a
    finite-difference oracle for the analytic gradient.
    """
    X = X.astype(np.longdouble)
    Z = X @ W.astype(np.longdouble).T + b.astype(np.longdouble)
    E = np.exp(Z - Z.max(axis=1, keepdims=True))
    P = E / E.sum(axis=1, keepdims=True)
    return -np.sum(P * Z) / np.longdouble(alpha)


def grad_check(model: ClusterModel, X, h: float = 1e-5, grads=None) -> float:
    """Max relative error between analytic and central-difference gradients.

    The relative error per coordinate is ``|a - f| / max(|a|, |f|, 1e-12)``.
    ``grads`` overrides the analytic gradient, which lets a caller check
    that a corrupted gradient is caught.
    """
    if h <= 0:
        raise ValueError("h must be > 0")
    X = as_data(X)
    g = grads if grads is not None else gradients(model, X)
    worst = 0.0
    for name, analytic in (("W", g.dW), ("b", g.db)):
        for idx in np.ndindex(analytic.shape):
            params = {"W": model.W.astype(np.longdouble), "b": model.b.astype(np.longdouble)}
            params[name][idx] += h
            f_plus = _objective_ld(params["W"], params["b"], model.alpha, X)
            params[name][idx] -= 2 * h
            f_minus = _objective_ld(params["W"], params["b"], model.alpha, X)
            numeric = float((f_plus - f_minus) / (2 * np.longdouble(h)))
            a = float(analytic[idx])
            err = abs(a - numeric) / max(abs(a), abs(numeric), 1e-12)
            worst = max(worst, err)
    return worst


@dataclass
class LipschitzRecord:
    step: int
    grad_norm: float
    z_max: float
    bound: float
    observed: float

    @property
    def holds(self) -> bool:
        return self.observed <= self.bound


def lipschitz_monitor(model: ClusterModel, X, step: int = 0) -> LipschitzRecord:
    """Compare the logit-space gradient of ``f(z) = sum_j p_j z_j`` with ``1 + 2 max|z|``.

    ``df/dz_j = p_j (1 + z_j - f)`` per sample; ``observed`` is its largest
    magnitude over all samples and clusters.
    """
    X = as_data(X)
    Z = X @ model.W.T + model.b
    P = soft_assign(Z)
    f = np.sum(P * Z, axis=1, keepdims=True)
    observed = float(np.max(np.abs(P * (1.0 + Z - f))))
    z_max = float(np.max(np.abs(Z)))
    return LipschitzRecord(step, gradients(model, X).norm(), z_max, 1.0 + 2.0 * z_max, observed)


def random_instance(rng: np.random.Generator, max_n=20, max_d=8, max_k=5,
                    alphas=(0.01, 0.1, 1.0)) -> tuple[ClusterModel, np.ndarray]:
    """A random (model, data) pair; parameters are perturbed tied parameters."""
    n = int(rng.integers(2, max_n + 1))
    d = int(rng.integers(1, max_d + 1))
    k = int(rng.integers(2, max_k + 1))
    alpha = float(rng.choice(alphas))
    X = rng.normal(size=(n, d))
    W, b = centroids_to_params(rng.normal(size=(k, d)), alpha)
    W = W + 2 * alpha * rng.normal(size=W.shape)
    b = b + alpha * rng.normal(size=b.shape)
    return ClusterModel(W, b, alpha), X


def gradcheck_audit(trials: int = 100, seed: int = 0, h: float = 1e-5) -> np.ndarray:
    rng = make_rng(seed, AUDIT)
    return np.array([grad_check(*random_instance(rng), h=h) for _ in range(trials)])


def lipschitz_audit(trials: int = 1000, seed: int = 0) -> list[LipschitzRecord]:
    rng = make_rng(seed, AUDIT)
    return [lipschitz_monitor(*random_instance(rng), step=t) for t in range(trials)]


def _labelings(n: int, k: int, chunk: int = 1 << 16):
    """Yield arrays of label vectors with exactly k clusters, one per partition
    (restricted-growth form: first occurrences appear in order 0, 1, ..., k-1)."""
    # label 0 is fixed for the first sample, so enumerate the remaining n-1
    powers = k ** np.arange(n - 2, -1, -1, dtype=np.int64)
    total = k ** (n - 1)
    for start in range(0, total, chunk):
        codes = np.arange(start, min(start + chunk, total), dtype=np.int64)
        L = np.zeros((len(codes), n), dtype=np.int64)
        L[:, 1:] = (codes[:, None] // powers) % k
        run_max = np.maximum.accumulate(L, axis=1)
        ok = (run_max[:, -1] == k - 1) & np.all(L[:, 1:] <= run_max[:, :-1] + 1, axis=1)
        if ok.any():
            yield L[ok]


def brute_force_kmeans(X, k: int, limit: int = BRUTE_FORCE_LIMIT):
    """Global k-means optimum by exhaustive search over all partitions into k groups.

    Returns (labels, centroids, inertia). Refuses instances with k**n > limit.
    """
    X = as_data(X)
    n = len(X)
    if k < 1 or k > n:
        raise CapacityError(f"need 1 <= k <= n, got k={k}, n={n}")
    if k**n > limit:
        raise CapacityError(f"k**n = {k}**{n} exceeds the exhaustive-search limit {limit}")

    sq_total = float(np.sum(X * X))
    best_val, candidates = np.inf, []
    for L in _labelings(n, k):
        onehot = (L[:, :, None] == np.arange(k)).astype(np.float64)
        counts = onehot.sum(axis=1)
        sums = np.einsum("mik,id->mkd", onehot, X)
        vals = sq_total - np.sum(np.einsum("mkd,mkd->mk", sums, sums) / counts, axis=1)
        m = float(vals.min())
        # the shortcut formula cancels badly; keep near-ties and re-score them exactly
        slack = 1e-9 * max(abs(m), sq_total) + 1e-12
        if m < best_val + slack:
            best_val = min(best_val, m)
            candidates = [c for c in candidates if c[0] < best_val + slack]
            keep = np.flatnonzero(vals < best_val + slack)
            candidates += [(float(vals[i]), L[i]) for i in keep]

    best = None
    for _, labels in candidates:
        centroids = np.stack([X[labels == j].mean(axis=0) for j in range(k)])
        val = inertia(X, labels, centroids)
        if best is None or val < best[2]:
            best = (labels.copy(), centroids, val)
    return best


@dataclass
class ConvergenceCheck:
    T: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    epsilon: float
    optimal_loss: float
    plateau_radius: float

    @property
    def margins(self) -> np.ndarray:
        return self.rhs - self.lhs

    @property
    def holds(self) -> bool:
        return bool(np.all(self.lhs <= self.rhs))

    @property
    def violations(self) -> list[tuple[int, float]]:
        bad = np.flatnonzero(self.lhs > self.rhs)
        return [(int(self.T[i]), float(self.margins[i])) for i in bad]


def theorem2_check(trace, X, k: int, eta: float | None = None) -> ConvergenceCheck:
    """Evaluate ``L*_T - L* <= (||W_1 - W*||_F^2 + eps^2 sum eta_t^2) / (2 sum eta_t)``.

    ``W*`` is the tied parametrization of the brute-force optimal centers,
    ``L*`` the loss there, ``eps`` the largest Lipschitz bound seen during
    training, and the Frobenius distance runs over ``[W b]``. Needs a
    full-batch trace (one step per epoch). The inequality is reported, not
    enforced.
    """
    X = as_data(X)
    if len(trace.step_sizes) != trace.epochs:
        raise ValueError("theorem2_check needs a full-batch trace with one step per epoch")
    _, omega, _ = brute_force_kmeans(X, k)
    W_star, b_star = centroids_to_params(omega, trace.alpha)
    L_star = loss(ClusterModel(W_star, b_star, trace.alpha), X).total

    etas = np.full(trace.epochs, eta) if eta is not None else np.asarray(trace.step_sizes)
    eps = max([trace.initial_bound, *trace.bound_per_epoch])
    dist2 = float(np.sum((trace.initial_W - W_star) ** 2) + np.sum((trace.initial_b - b_star) ** 2))

    # L_t is the loss at the parameters the t-th step starts from
    losses = np.array([trace.initial_loss, *trace.loss_per_epoch[:-1]])
    T = np.arange(1, trace.epochs + 1)
    lhs = np.minimum.accumulate(losses) - L_star
    rhs = (dist2 + eps**2 * np.cumsum(etas**2)) / (2 * np.cumsum(etas))
    check = ConvergenceCheck(T, lhs, rhs, eps, L_star, float(np.mean(etas)) * eps**2 / 2)
    for t, margin in check.violations:
        log.warning("bound violated at T=%d by %.3g", t, -margin)
    return check


def boundedness_curve(z_min: float, z_max: float, samples: int) -> np.ndarray:
    """Samples of ``f(z) = z e^z / (e^z + e^0)`` as a (samples, 2) array of (z, f)."""
    if not z_min < z_max:
        raise ValueError("z_min must be < z_max")
    if samples < 2:
        raise ValueError("samples must be >= 2")
    z = np.linspace(z_min, z_max, samples)
    return np.column_stack([z, z * expit(z)])
