"""External clustering metrics computed from a contingency table.

Entropies use natural logs. NMI and AMI normalize by the arithmetic mean of
the two label entropies; AMI takes the expected mutual information under the
permutation (hypergeometric) model.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.special import gammaln

from .errors import ShapeError


@dataclass
class ClusteringReport:
    accuracy: float
    nmi: float
    ari: float
    ami: float
    homogeneity: float
    completeness: float
    v_measure: float
    confusion: np.ndarray

    def as_dict(self) -> dict:
        d = asdict(self)
        d["confusion"] = self.confusion.tolist()
        return d


def _check(y_true, y_pred):
    y_true = np.asarray(y_true).reshape(-1)
    y_pred = np.asarray(y_pred).reshape(-1)
    if y_true.shape != y_pred.shape:
        raise ShapeError(f"label vectors differ in length: {y_true.size} vs {y_pred.size}")
    if y_true.size == 0:
        raise ValueError("empty label vectors")
    return y_true, y_pred


def confusion(y_true, y_pred) -> np.ndarray:
    """Counts of (true class a, predicted cluster b) for dense labels in [0, k)."""
    y_true, y_pred = _check(y_true, y_pred)
    y_true = y_true.astype(np.int64)
    y_pred = y_pred.astype(np.int64)
    if y_true.min() < 0 or y_pred.min() < 0:
        raise ValueError("labels must be non-negative")
    C = np.zeros((y_true.max() + 1, y_pred.max() + 1), dtype=np.int64)
    np.add.at(C, (y_true, y_pred), 1)
    return C


def contingency(y_true, y_pred) -> np.ndarray:
    """Like ``confusion`` but for arbitrary labels, with unused labels dropped."""
    y_true, y_pred = _check(y_true, y_pred)
    _, a = np.unique(y_true, return_inverse=True)
    _, b = np.unique(y_pred, return_inverse=True)
    C = np.zeros((a.max() + 1, b.max() + 1), dtype=np.int64)
    np.add.at(C, (a, b), 1)
    return C


def accuracy_hungarian(y_true, y_pred) -> float:
    """Fraction correct under the best one-to-one cluster-to-class mapping."""
    C = contingency(y_true, y_pred)
    rows, cols = linear_sum_assignment(C, maximize=True)
    return float(C[rows, cols].sum() / C.sum())


def purity(y_true, y_pred) -> float:
    """Greedy purity: each cluster votes for its majority class."""
    C = contingency(y_true, y_pred)
    return float(C.max(axis=0).sum() / C.sum())


def _entropy(counts: np.ndarray) -> float:
    n = counts.sum()
    p = counts[counts > 0] / n
    return -math.fsum(p * np.log(p))


def _mutual_info(C: np.ndarray) -> float:
    n = C.sum()
    a = C.sum(axis=1, keepdims=True)
    b = C.sum(axis=0, keepdims=True)
    nz = C > 0
    outer = (a * b)[nz]
    return math.fsum(C[nz] / n * (np.log(C[nz]) + np.log(n) - np.log(outer)))


def expected_mutual_info(C: np.ndarray) -> float:
    """E[MI] over all tables with the margins of ``C`` (hypergeometric model)."""
    n = int(C.sum())
    a = C.sum(axis=1).astype(np.int64)
    b = C.sum(axis=0).astype(np.int64)
    ai, bj = (v.ravel() for v in np.meshgrid(a, b, indexing="ij"))
    lo = np.maximum(1, ai + bj - n)
    hi = np.minimum(ai, bj)
    count = np.maximum(hi - lo + 1, 0)
    if count.sum() == 0:
        return 0.0
    # one entry per (cell, n_ij) term
    ai, bj, lo = (np.repeat(v, count) for v in (ai, bj, lo))
    starts = np.cumsum(count) - count
    nij = lo + np.arange(count.sum()) - np.repeat(starts, count)
    lg = gammaln(np.arange(n + 1, dtype=np.float64) + 1)  # lg[m] = log(m!)
    # grouped so that swapping the two margins gives bit-identical terms
    log_p = ((lg[ai] + lg[bj]) + (lg[n - ai] + lg[n - bj])
             - lg[n] - lg[nij] - (lg[ai - nij] + lg[bj - nij]) - lg[n - ai - bj + nij])
    terms = nij / n * (np.log(n * nij) - np.log(ai * bj)) * np.exp(log_p)
    return math.fsum(terms)


def _from_table(C: np.ndarray) -> dict:
    n = C.sum()
    h_true = _entropy(C.sum(axis=1))
    h_pred = _entropy(C.sum(axis=0))
    mi = _mutual_info(C)
    mean_h = (h_true + h_pred) / 2

    # A labelling with one group carries no information; two such agree perfectly.
    if h_true == 0 and h_pred == 0:
        nmi = 1.0
    else:
        nmi = mi / mean_h

    emi = expected_mutual_info(C)
    denom = mean_h - emi
    # margins that admit a single table up to relabelling: identical partitions
    ami = 1.0 if abs(denom) <= 1e-15 * max(1.0, mean_h) else (mi - emi) / denom

    homogeneity = 1.0 if h_true == 0 else mi / h_true
    completeness = 1.0 if h_pred == 0 else mi / h_pred
    hc = homogeneity + completeness
    v_measure = 0.0 if hc == 0 else 2 * homogeneity * completeness / hc

    pairs_all = int(n) * (int(n) - 1) / 2
    # integer pair counts, exact in any order
    pairs_cells = int(np.sum(C * (C - 1))) / 2
    pairs_true = int(np.sum(C.sum(axis=1) * (C.sum(axis=1) - 1))) / 2
    pairs_pred = int(np.sum(C.sum(axis=0) * (C.sum(axis=0) - 1))) / 2
    if pairs_all == 0:
        ari = 1.0
    else:
        expected = pairs_true * pairs_pred / pairs_all
        max_index = (pairs_true + pairs_pred) / 2
        ari = 1.0 if max_index == expected else (pairs_cells - expected) / (max_index - expected)

    clip = lambda v: float(min(max(v, 0.0), 1.0))
    return dict(nmi=clip(nmi), ari=float(ari), ami=float(ami), homogeneity=clip(homogeneity),
                completeness=clip(completeness), v_measure=clip(v_measure))


def nmi(y_true, y_pred) -> float:
    return _from_table(contingency(y_true, y_pred))["nmi"]


def ari(y_true, y_pred) -> float:
    return _from_table(contingency(y_true, y_pred))["ari"]


def ami(y_true, y_pred) -> float:
    return _from_table(contingency(y_true, y_pred))["ami"]


def clustering_report(y_true, y_pred) -> ClusteringReport:
    C = contingency(y_true, y_pred)
    rows, cols = linear_sum_assignment(C, maximize=True)
    acc = float(C[rows, cols].sum() / C.sum())
    y_true, y_pred = _check(y_true, y_pred)
    dense = all(np.issubdtype(y.dtype, np.integer) and y.min() >= 0 for y in (y_true, y_pred))
    table = confusion(y_true, y_pred) if dense else C
    return ClusteringReport(accuracy=acc, confusion=table, **_from_table(C))
