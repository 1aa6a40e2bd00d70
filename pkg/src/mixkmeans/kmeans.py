"""Lloyd's algorithm with D^2 seeding in working, low and mixed precision.

Distances come from :class:`~mixkmeans.distance.BlockDistance` in the
configured mode; center updates, SSE and the sampling arithmetic of the
seeding always run in float64.

Randomness: a fit with ``seed=s`` draws everything from
``numpy.random.default_rng(s)`` (PCG64) in a fixed order. It takes one
integer for the first center, then one uniform double per further
center. The five-seed protocol is seeds 0 to 4.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from . import kernels
from .distance import MODES, BlockDistance, PrecisionContext, working_distances
from .metrics import sse as _sse

log = logging.getLogger(__name__)


@dataclass
class KMeansConfig:
    k: int
    max_iter: int = 300
    tol: float = 1e-4
    mode: str = "working"
    ctx: PrecisionContext = field(default_factory=PrecisionContext)
    seed: int = 0
    rescue: bool = True

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not self.tol >= 0:
            raise ValueError("tol must be >= 0")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")


@dataclass
class Clustering:
    """Result of :func:`fit`. Centers are stored one per row, shape (k, r)."""

    centers: np.ndarray
    labels: np.ndarray
    cardinalities: np.ndarray
    iterations_run: int
    sse: float
    eta: float
    sse_history: List[float] = field(default_factory=list)
    precision_bounds: List[Optional[float]] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)
    seed_indices: Optional[np.ndarray] = None
    ctx: Optional[PrecisionContext] = None


def seed_d2(X, k: int, rng: np.random.Generator, dist: BlockDistance, warnings: Optional[list] = None):
    """Indices of ``k`` distinct rows of ``X`` chosen by D^2 weighting.

    Each new center is drawn with probability proportional to the squared
    distance (as computed by ``dist``) to the closest center chosen so far.
    If those weights sum to zero or to a non-finite value, the draw is
    uniform over the rows not yet chosen and a warning is recorded.
    """
    X = np.asarray(X)
    n = X.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    chosen = np.zeros(n, dtype=bool)
    idx = np.empty(k, dtype=np.int64)
    idx[0] = rng.integers(n)
    chosen[idx[0]] = True
    closest = np.full(n, np.inf)
    for j in range(1, k):
        closest = np.minimum(closest, dist(X[idx[j - 1]][None, :])[:, 0])
        w = np.where(chosen, 0.0, closest)
        total = float(np.sum(w))
        draw = rng.random()
        if total > 0.0 and math.isfinite(total):
            cdf = np.cumsum(w)
            pick = int(np.searchsorted(cdf, draw * cdf[-1], side="right"))
            pick = min(pick, n - 1)
            while w[pick] == 0.0:  # guards the top edge of the cdf
                pick -= 1
        else:
            remaining = np.flatnonzero(~chosen)
            pick = int(remaining[min(int(draw * remaining.size), remaining.size - 1)])
            msg = f"seeding: D^2 weights {'non-finite' if not math.isfinite(total) else 'all zero'} at center {j}; drew uniformly"
            log.warning(msg)
            if warnings is not None:
                warnings.append(msg)
        idx[j] = pick
        chosen[pick] = True
    return idx


def assign(D: np.ndarray, X=None, C=None, rescue: bool = True, warnings: Optional[list] = None) -> np.ndarray:
    """Nearest center per row of the distance block ``D`` (n, k).

    Ties go to the lowest center index. Rows where every distance is
    non-finite are recomputed in float64 when ``rescue`` is set (needs
    ``X`` and ``C``); otherwise they fall to center 0.
    """
    labels = np.argmin(D, axis=1)
    dead = ~np.any(np.isfinite(D), axis=1)
    n_dead = int(dead.sum())
    if n_dead:
        if rescue:
            if X is None or C is None:
                raise ValueError("rescue needs the points and centers")
            labels[dead] = np.argmin(working_distances(np.asarray(X)[dead], C), axis=1)
            msg = f"assign: {n_dead} points had no finite distance; reassigned in float64"
        else:
            msg = f"assign: {n_dead} points had no finite distance; left on center 0"
        log.warning(msg)
        if warnings is not None:
            warnings.append(msg)
    return labels


def update_centers(X, labels, k: int, prev=None, warnings: Optional[list] = None):
    """Cluster means in float64 (sequential sums, then one division).

    Returns ``(centers, cardinalities)``. An empty cluster keeps its row of
    ``prev``.
    """
    sums, counts = kernels.cluster_sums(X, labels, k)
    centers = np.empty_like(sums)
    empty = counts == 0
    nz = ~empty
    centers[nz] = sums[nz] / counts[nz, None]
    if empty.any():
        if prev is None:
            raise ValueError("empty cluster and no previous centers to fall back on")
        centers[empty] = np.asarray(prev)[empty]
        msg = f"update: clusters {np.flatnonzero(empty).tolist()} empty; kept previous centers"
        log.info(msg)
        if warnings is not None:
            warnings.append(msg)
    return centers, counts


def converged(prev_centers, new_centers, tol: float) -> bool:
    """Frobenius norm of the center movement is at most ``tol``."""
    return float(np.linalg.norm(np.asarray(new_centers) - np.asarray(prev_centers))) <= tol


def center_update_precision_bound(prev_center, new_center) -> Optional[float]:
    """Largest unit roundoff for which this center update still lowers the energy.

    ``|c - m|^T |c - m| / (2 |c - m|^T |m|)`` with ``c`` the previous and
    ``m`` the new center. Returns ``None`` when the centers coincide and
    ``inf`` when the new center is the origin.
    """
    c = np.asarray(prev_center, dtype=np.float64)
    m = np.asarray(new_center, dtype=np.float64)
    move = np.abs(c - m)
    num = math.fsum(move * move)
    if num == 0.0:
        return None
    den = 2.0 * math.fsum(move * np.abs(m))
    if den == 0.0:
        return math.inf
    return num / den


def _iteration_bound(prev, new):
    vals = [center_update_precision_bound(p, q) for p, q in zip(prev, new)]
    vals = [v for v in vals if v is not None]
    return min(vals) if vals else None


def eta(ctx: PrecisionContext) -> float:
    return ctx.eta


def energy_identity_check(S, probe):
    """Both sides of ``phi(p', S) = phi(mu, S) + |S| dist(p', mu)^2``.

    ``S`` is (m, r); returns ``(lhs, rhs)`` computed in float64.
    """
    S = np.atleast_2d(np.asarray(S, dtype=np.float64))
    p = np.asarray(probe, dtype=np.float64)
    mu = S.mean(axis=0)
    lhs = math.fsum(((S - p) ** 2).ravel())
    rhs = math.fsum(((S - mu) ** 2).ravel()) + S.shape[0] * math.fsum((p - mu) ** 2)
    return lhs, rhs


def fit(P, cfg: KMeansConfig) -> Clustering:
    """Run seeding plus Lloyd iterations.

    ``P`` is a :class:`~mixkmeans.data.Dataset` or an (n, r) array. Stops
    when the centers move by at most ``cfg.tol`` or after ``cfg.max_iter``
    iterations. The final labels come from a float64 assignment pass, except
    when ``cfg.rescue`` is off: then they come from one more pass of the
    mode's own kernel, so low-precision failures stay visible.
    """
    X = P.X if hasattr(P, "X") else np.ascontiguousarray(P, dtype=np.float64)
    n = X.shape[0]
    if cfg.k > n:
        raise ValueError(f"k={cfg.k} exceeds the number of points n={n}")
    if not np.all(np.isfinite(X)):
        raise ValueError("data contains non-finite values")
    ctx = cfg.ctx.fresh()
    dist = BlockDistance(X, cfg.mode, ctx)
    rng = np.random.default_rng(cfg.seed)
    warns: List[str] = []

    seeds = seed_d2(X, cfg.k, rng, dist, warns)
    C = X[seeds].copy()
    sse_hist, bounds = [], []
    it = 0
    for it in range(1, cfg.max_iter + 1):
        labels = assign(dist(C), X, C, cfg.rescue, warns)
        newC, _ = update_centers(X, labels, cfg.k, prev=C, warnings=warns)
        sse_hist.append(_sse(X, labels, newC))
        bounds.append(_iteration_bound(C, newC))
        done = converged(C, newC, cfg.tol)
        C = newC
        if done:
            break

    if cfg.rescue or cfg.mode == "working":
        labels = np.argmin(working_distances(X, C), axis=1)
    else:
        labels = assign(dist(C), rescue=False, warnings=warns)
    counts = np.bincount(labels, minlength=cfg.k)
    return Clustering(
        centers=C,
        labels=labels,
        cardinalities=counts,
        iterations_run=it,
        sse=_sse(X, labels, C),
        eta=ctx.eta,
        sse_history=sse_hist,
        precision_bounds=bounds,
        warnings=warns,
        seed_indices=seeds,
        ctx=ctx,
    )
