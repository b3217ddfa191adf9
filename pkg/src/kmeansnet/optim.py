"""Decoupled stochastic training of a ClusterModel."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from ._rng import SHUFFLE, make_rng
from .core import (
    ClusterModel,
    Gradients,
    as_data,
    centroids_to_params,
    hard_assign,
    logits,
    loss_and_gradients,
    soft_assign,
)
from .errors import TrainingError
from .init import InitMethod, initialize

log = logging.getLogger(__name__)


class OptimizerKind(str, Enum):
    SGD_FIXED_STEP = "sgd_fixed_step"
    SGD_FIXED_LENGTH = "sgd_fixed_length"
    ADADELTA = "adadelta"
    ADAGRAD = "adagrad"
    ADAM = "adam"
    RMSPROP = "rmsprop"


# eta, rho, beta1, beta2, eps
_DEFAULTS = {
    OptimizerKind.SGD_FIXED_STEP: dict(eta=0.01),
    OptimizerKind.SGD_FIXED_LENGTH: dict(eta=0.01),
    OptimizerKind.ADADELTA: dict(eta=1.0, rho=0.95, eps=1e-6),
    OptimizerKind.ADAGRAD: dict(eta=0.01, eps=1e-10),
    OptimizerKind.ADAM: dict(eta=1e-3, beta1=0.9, beta2=0.999, eps=1e-8),
    OptimizerKind.RMSPROP: dict(eta=1e-3, rho=0.9, eps=1e-8),
}


@dataclass
class OptimizerConfig:
    """Optimizer choice and hyperparameters.

    Unset fields take the usual published defaults for the chosen kind:
    AdaDelta (eta=1, rho=0.95, eps=1e-6), Adagrad (eta=0.01, eps=1e-10),
    Adam (eta=1e-3, betas 0.9/0.999, eps=1e-8), RMSprop (eta=1e-3,
    rho=0.9, eps=1e-8); both plain SGD rules default to eta=0.01.
    """

    kind: OptimizerKind = OptimizerKind.ADADELTA
    eta: float | None = None
    rho: float | None = None
    beta1: float | None = None
    beta2: float | None = None
    eps: float | None = None

    def __post_init__(self):
        self.kind = OptimizerKind(self.kind)
        for name, value in _DEFAULTS[self.kind].items():
            if getattr(self, name) is None:
                setattr(self, name, value)
        if not (self.eta is not None and self.eta > 0):
            raise ValueError(f"eta must be > 0, got {self.eta}")
        for name in ("rho", "beta1", "beta2"):
            v = getattr(self, name)
            if v is not None and not 0 <= v < 1:
                raise ValueError(f"{name} must lie in [0, 1), got {v}")
        if self.eps is not None and self.eps <= 0:
            raise ValueError(f"eps must be > 0, got {self.eps}")


class Optimizer:
    """Per-parameter update rule. ``step`` returns new arrays and never
    mixes the state of different parameters."""

    def __init__(self, config: OptimizerConfig):
        self.config = config
        self.state: dict[str, dict[str, np.ndarray]] = {}
        self.t = 0

    def step(self, params: dict, grads: dict) -> dict:
        self.t += 1
        return {name: params[name] + self._delta(name, grads[name]) for name in params}

    def _slot(self, name, slot, like):
        s = self.state.setdefault(name, {})
        if slot not in s:
            s[slot] = np.zeros_like(like)
        return s[slot]

    def _delta(self, name, g):
        raise NotImplementedError


class SGDFixedStep(Optimizer):
    def _delta(self, name, g):
        return -self.config.eta * g


class SGDFixedLength(Optimizer):
    """Step of length eta along the negative gradient of all parameters jointly."""

    def step(self, params, grads):
        norm = np.sqrt(sum(float(np.sum(grads[name] ** 2)) for name in params))
        if norm == 0.0:
            log.info("zero gradient; fixed-length step skipped")
            return {name: p.copy() for name, p in params.items()}
        self.t += 1
        return {name: params[name] - self.config.eta * grads[name] / norm for name in params}


class AdaDelta(Optimizer):
    def _delta(self, name, g):
        c = self.config
        eg2 = self._slot(name, "eg2", g)
        edx2 = self._slot(name, "edx2", g)
        eg2 *= c.rho
        eg2 += (1 - c.rho) * g * g
        dx = -np.sqrt(edx2 + c.eps) / np.sqrt(eg2 + c.eps) * g
        edx2 *= c.rho
        edx2 += (1 - c.rho) * dx * dx
        return c.eta * dx


class Adagrad(Optimizer):
    def _delta(self, name, g):
        acc = self._slot(name, "sum_g2", g)
        acc += g * g
        return -self.config.eta * g / (np.sqrt(acc) + self.config.eps)


class Adam(Optimizer):
    def _delta(self, name, g):
        c = self.config
        m = self._slot(name, "m", g)
        v = self._slot(name, "v", g)
        m *= c.beta1
        m += (1 - c.beta1) * g
        v *= c.beta2
        v += (1 - c.beta2) * g * g
        m_hat = m / (1 - c.beta1**self.t)
        v_hat = v / (1 - c.beta2**self.t)
        return -c.eta * m_hat / (np.sqrt(v_hat) + c.eps)


class RMSprop(Optimizer):
    def _delta(self, name, g):
        c = self.config
        ms = self._slot(name, "ms", g)
        ms *= c.rho
        ms += (1 - c.rho) * g * g
        return -c.eta * g / (np.sqrt(ms) + c.eps)


_OPTIMIZERS = {
    OptimizerKind.SGD_FIXED_STEP: SGDFixedStep,
    OptimizerKind.SGD_FIXED_LENGTH: SGDFixedLength,
    OptimizerKind.ADADELTA: AdaDelta,
    OptimizerKind.ADAGRAD: Adagrad,
    OptimizerKind.ADAM: Adam,
    OptimizerKind.RMSPROP: RMSprop,
}


def make_optimizer(config: OptimizerConfig) -> Optimizer:
    return _OPTIMIZERS[config.kind](config)


def optimizer_step(opt: Optimizer, model: ClusterModel, grads: Gradients,
                   update_bias: bool = True) -> ClusterModel:
    """Apply one update. ``W`` and ``b`` move independently, each along its own gradient."""
    params = {"W": model.W}
    g = {"W": grads.dW}
    if update_bias:
        params["b"] = model.b
        g["b"] = grads.db
    # overflow is reported as a TrainingError below rather than as a numpy warning
    with np.errstate(over="ignore", invalid="ignore"):
        new = opt.step(params, g)
    if not all(np.all(np.isfinite(v)) for v in new.values()):
        raise TrainingError("parameters became non-finite after an optimizer step")
    return ClusterModel(new["W"], new.get("b", model.b.copy()), model.alpha)


def project(model: ClusterModel, radius: float) -> ClusterModel:
    """Clip each ``W_j`` to norm ``2 alpha radius`` and ``b`` to ``[-alpha radius^2, 0]``."""
    W = model.W.copy()
    cap = 2.0 * model.alpha * radius
    norms = np.linalg.norm(W, axis=1)
    over = norms > cap
    W[over] *= (cap / norms[over])[:, None]
    b = np.clip(model.b, -model.alpha * radius**2, 0.0)
    return ClusterModel(W, b, model.alpha)


def tie_bias(model: ClusterModel) -> ClusterModel:
    b = -np.einsum("ij,ij->i", model.W, model.W) / (4.0 * model.alpha)
    return ClusterModel(model.W, b, model.alpha)


@dataclass
class TrainConfig:
    max_epochs: int = 3000
    tol: float = 1e-3
    batch_size: int = 256
    seed: int = 0
    project: bool = True
    tie_bias: bool = False
    eval_every: int = 0

    def __post_init__(self):
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")
        if self.tol < 0:
            raise ValueError("tol must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


@dataclass
class TrainTrace:
    loss_per_epoch: list[float] = field(default_factory=list)
    grad_norm_per_epoch: list[float] = field(default_factory=list)
    bound_per_epoch: list[float] = field(default_factory=list)
    step_sizes: list[float] = field(default_factory=list)
    metrics: list[dict] = field(default_factory=list)
    alpha: float = float("nan")
    initial_loss: float = float("nan")
    initial_bound: float = float("nan")
    initial_W: np.ndarray | None = None
    initial_b: np.ndarray | None = None
    converged: bool = False

    @property
    def epochs(self) -> int:
        return len(self.loss_per_epoch)

    @property
    def best_loss(self) -> float:
        return min(self.loss_per_epoch)

    @property
    def best_epoch(self) -> int:
        return int(np.argmin(self.loss_per_epoch)) + 1


def _lipschitz_bound(Z: np.ndarray) -> float:
    return 1.0 + 2.0 * float(np.max(np.abs(Z)))


def train(X, k: int, init="kmeans++", opt: OptimizerConfig | None = None,
          cfg: TrainConfig | None = None, alpha: float = 1e-3,
          labels=None) -> tuple[ClusterModel, TrainTrace]:
    """Fit a ClusterModel by shuffled mini-batch descent on the soft k-means loss.

    ``init`` is an initializer name or an explicit (k, d) centroid array.
    Training stops once the relative change of the full-data loss between
    consecutive epochs drops below ``cfg.tol`` or after ``cfg.max_epochs``.
    When ``labels`` is given and ``cfg.eval_every > 0``, clustering metrics
    are recorded every ``eval_every`` epochs.
    """
    X = as_data(X)
    opt = opt or OptimizerConfig()
    cfg = cfg or TrainConfig()
    n = len(X)
    if k < 2:
        raise ValueError(f"k must be >= 2 for training, got {k}")

    if isinstance(init, (str, InitMethod)):
        omega = initialize(X, k, init, cfg.seed)
    else:
        omega = np.array(init, dtype=np.float64, ndmin=2)
    W0, b0 = centroids_to_params(omega, alpha)
    if not (np.all(np.isfinite(W0)) and np.all(np.isfinite(b0))):
        raise TrainingError("initial parameters overflow; rescale the data or lower alpha")
    model = ClusterModel(W0, b0, alpha)
    if model.k != k:
        raise ValueError(f"initial centroids have {model.k} rows, expected k={k}")

    radius = float(np.max(np.linalg.norm(X, axis=1)))
    optimizer = make_optimizer(opt)
    rng = make_rng(cfg.seed, SHUFFLE)
    batch = min(cfg.batch_size, n)

    trace = TrainTrace(alpha=alpha, initial_W=model.W.copy(), initial_b=model.b.copy())
    lb, _ = loss_and_gradients(model, X)
    trace.initial_loss = lb.total
    trace.initial_bound = _lipschitz_bound(lb.logits)
    previous = lb.total

    for epoch in range(1, cfg.max_epochs + 1):
        order = rng.permutation(n)
        for start in range(0, n, batch):
            Xb = X[order[start:start + batch]]
            _, grads = loss_and_gradients(model, Xb)
            if opt.kind is OptimizerKind.SGD_FIXED_LENGTH:
                gn = np.sqrt(np.sum(grads.dW**2) + (0.0 if cfg.tie_bias else np.sum(grads.db**2)))
                trace.step_sizes.append(opt.eta / gn if gn > 0 else 0.0)
            else:
                trace.step_sizes.append(opt.eta)
            model = optimizer_step(optimizer, model, grads, update_bias=not cfg.tie_bias)
            if cfg.project:
                model = project(model, radius)
            if cfg.tie_bias:
                model = tie_bias(model)

        lb, grads = loss_and_gradients(model, X)
        if not np.isfinite(lb.total):
            raise TrainingError(f"loss became non-finite at epoch {epoch}")
        trace.loss_per_epoch.append(lb.total)
        trace.grad_norm_per_epoch.append(grads.norm())
        trace.bound_per_epoch.append(_lipschitz_bound(lb.logits))
        if labels is not None and cfg.eval_every and epoch % cfg.eval_every == 0:
            from .metrics import clustering_report

            rep = clustering_report(labels, hard_assign(lb.assignment))
            trace.metrics.append({"epoch": epoch, "accuracy": rep.accuracy,
                                  "nmi": rep.nmi, "ari": rep.ari})
        log.debug("epoch %d loss %.6g", epoch, lb.total)

        change = abs(lb.total - previous) / max(abs(previous), 1e-12)
        previous = lb.total
        if change < cfg.tol:
            trace.converged = True
            break
    return model, trace


def predict(model: ClusterModel, X) -> np.ndarray:
    return hard_assign(soft_assign(logits(model, X)))
