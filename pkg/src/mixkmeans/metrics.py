"""Label-based clustering quality measures and SSE.

All entropies use natural logarithms. Completeness is reported as ``None``
(NA) when the prediction collapses every point into one cluster while the
ground truth has several classes: the raw score would be 1 there, which
would read as a perfect result.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
from scipy.special import gammaln


@dataclass(frozen=True)
class ContingencyTable:
    counts: np.ndarray  # (k_true, k_pred) int64

    @classmethod
    def from_labels(cls, true_labels, pred_labels) -> "ContingencyTable":
        a = np.asarray(true_labels).ravel()
        b = np.asarray(pred_labels).ravel()
        if a.shape != b.shape:
            raise ValueError(f"label vectors differ in length: {a.size} vs {b.size}")
        if a.size == 0:
            raise ValueError("empty labelings")
        _, ai = np.unique(a, return_inverse=True)
        _, bi = np.unique(b, return_inverse=True)
        counts = np.zeros((ai.max() + 1, bi.max() + 1), dtype=np.int64)
        np.add.at(counts, (ai, bi), 1)
        return cls(counts)

    @property
    def n(self) -> int:
        return int(self.counts.sum())

    @property
    def row_sums(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def col_sums(self) -> np.ndarray:
        return self.counts.sum(axis=0)

    def is_matching(self) -> bool:
        """Both partitions are the same up to renaming."""
        nz = self.counts > 0
        return bool(np.all(nz.sum(axis=0) == 1) and np.all(nz.sum(axis=1) == 1))


@dataclass(frozen=True)
class MetricsReport:
    sse: float
    ari: float
    ami: float
    homogeneity: float
    completeness: Optional[float]
    v_measure: float
    eta: float

    def as_dict(self) -> dict:
        return asdict(self)


def sse(X, labels, centers) -> float:
    """Sum over points of the squared distance to their own center (float64).

    ``X`` is (n, r) and ``centers`` is (k, r).
    """
    X = np.asarray(X, dtype=np.float64)
    C = np.asarray(centers, dtype=np.float64)
    diff = X - C[np.asarray(labels)]
    return float(np.sum(diff * diff))


def _comb2(x):
    x = np.asarray(x, dtype=np.float64)
    return x * (x - 1.0) / 2.0


def ari(true_labels, pred_labels) -> float:
    ct = ContingencyTable.from_labels(true_labels, pred_labels)
    n = ct.n
    sum_ij = float(_comb2(ct.counts).sum())
    sum_a = float(_comb2(ct.row_sums).sum())
    sum_b = float(_comb2(ct.col_sums).sum())
    total = n * (n - 1) / 2.0
    expected = sum_a * sum_b / total if total else 0.0
    max_index = 0.5 * (sum_a + sum_b)
    denom = max_index - expected
    if denom == 0.0:
        # both partitions trivial (one cluster each, or all singletons)
        return 1.0
    return (sum_ij - expected) / denom


def _entropy(counts) -> float:
    counts = np.asarray(counts, dtype=np.float64)
    counts = counts[counts > 0]
    n = counts.sum()
    if counts.size <= 1:
        return 0.0
    p = counts / n
    return float(-np.sum(p * np.log(p)))


def mutual_info(ct: ContingencyTable) -> float:
    n = ct.n
    a = ct.row_sums.astype(np.float64)
    b = ct.col_sums.astype(np.float64)
    i, j = np.nonzero(ct.counts)
    nij = ct.counts[i, j].astype(np.float64)
    mi = np.sum(nij / n * (np.log(nij) + math.log(n) - np.log(a[i]) - np.log(b[j])))
    return max(float(mi), 0.0)


def expected_mutual_info(ct: ContingencyTable) -> float:
    """E[MI] under the hypergeometric model with both margins fixed."""
    n = ct.n
    a = ct.row_sums.astype(np.int64)
    b = ct.col_sums.astype(np.int64)
    lg_a, lg_b = gammaln(a + 1.0), gammaln(b + 1.0)
    lg_na, lg_nb = gammaln(n - a + 1.0), gammaln(n - b + 1.0)
    lg_n = gammaln(n + 1.0)
    emi = 0.0
    for ia in range(a.size):
        for jb in range(b.size):
            lo = max(1, a[ia] + b[jb] - n)
            hi = min(a[ia], b[jb])
            if hi < lo:
                continue
            nij = np.arange(lo, hi + 1, dtype=np.float64)
            term1 = nij / n * (np.log(nij) + math.log(n) - math.log(a[ia]) - math.log(b[jb]))
            log_p = (
                lg_a[ia] + lg_b[jb] + lg_na[ia] + lg_nb[jb] - lg_n
                - gammaln(nij + 1.0)
                - gammaln(a[ia] - nij + 1.0)
                - gammaln(b[jb] - nij + 1.0)
                - gammaln(n - a[ia] - b[jb] + nij + 1.0)
            )
            emi += float(np.sum(term1 * np.exp(log_p)))
    return emi


def ami(true_labels, pred_labels) -> float:
    """Adjusted mutual information, arithmetic-mean normalization."""
    ct = ContingencyTable.from_labels(true_labels, pred_labels)
    k_true, k_pred = ct.counts.shape
    if (k_true == k_pred == 1) or ct.is_matching():
        return 1.0
    mi = mutual_info(ct)
    emi = expected_mutual_info(ct)
    h_true, h_pred = _entropy(ct.row_sums), _entropy(ct.col_sums)
    denom = 0.5 * (h_true + h_pred) - emi
    eps = np.finfo(np.float64).eps
    denom = min(denom, -eps) if denom < 0 else max(denom, eps)
    return float((mi - emi) / denom)


def homogeneity_completeness_v(true_labels, pred_labels):
    """``(h, c, v)``; ``c`` is ``None`` for a single-cluster collapse."""
    ct = ContingencyTable.from_labels(true_labels, pred_labels)
    h_true, h_pred = _entropy(ct.row_sums), _entropy(ct.col_sums)
    mi = mutual_info(ct)
    h = 1.0 if h_true == 0.0 else min(max(mi / h_true, 0.0), 1.0)
    c = 1.0 if h_pred == 0.0 else min(max(mi / h_pred, 0.0), 1.0)
    if ct.is_matching():
        h = c = 1.0
    v = 0.0 if h + c == 0.0 else 2.0 * h * c / (h + c)
    k_true, k_pred = ct.counts.shape
    if k_pred == 1 and k_true > 1:
        return h, None, v
    return h, c, v


def evaluate(X, labels, centers, true_labels=None, eta: float = 0.0) -> MetricsReport:
    """Every reported measure for one clustering.

    Without ground truth the label-based fields are NaN.
    """
    s = sse(X, labels, centers)
    if true_labels is None:
        nan = math.nan
        return MetricsReport(s, nan, nan, nan, nan, nan, eta)
    h, c, v = homogeneity_completeness_v(true_labels, labels)
    return MetricsReport(s, ari(true_labels, labels), ami(true_labels, labels), h, c, v, eta)
