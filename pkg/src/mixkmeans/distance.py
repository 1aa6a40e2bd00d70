"""Squared Euclidean distances in uniform and mixed precision.

Scalar functions (``dist_sq_*``) return a :class:`DistanceOutcome` with
rounding flags and are meant for inspection and testing. k-means itself
uses :class:`BlockDistance`, which evaluates whole point-by-center blocks
through :mod:`mixkmeans.kernels`.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from typing import FrozenSet, Optional

import numpy as np

from . import kernels
from .simfloat import FP16, FP64, OVERFLOWED, FloatFormat, fl_op, gamma, inner_product, round_array, round_to_format

CLAMPED = "clamped"
MODES = ("working", "low", "mixed")


@dataclass(frozen=True)
class DistanceOutcome:
    d2: float
    used_low_precision: bool = False
    flags: FrozenSet[str] = field(default_factory=frozenset)


@dataclass
class PrecisionContext:
    """Working/low format pair, trigger threshold and trigger counters.

    Counter updates go through :meth:`record`, which holds a lock, so a
    context may be shared by worker threads.
    """

    work: FloatFormat = FP64
    low: FloatFormat = FP16
    delta: float = 2.0
    total: int = 0
    triggered: int = 0

    def __post_init__(self):
        if self.low.u < self.work.u:
            raise ValueError(f"low format {self.low} is more precise than working format {self.work}")
        if not self.delta >= 1.0:
            raise ValueError(f"delta must be >= 1, got {self.delta}")
        self._lock = threading.Lock()

    def record(self, total: int, triggered: int) -> None:
        with self._lock:
            self.total += int(total)
            self.triggered += int(triggered)

    def fresh(self) -> "PrecisionContext":
        """Same formats and delta, counters reset."""
        return PrecisionContext(self.work, self.low, self.delta)

    @property
    def eta(self) -> float:
        return self.triggered / self.total if self.total else 0.0


def _clean(d2, flags, used_low=False):
    flags = set(flags)
    if math.isnan(d2):
        d2 = math.inf
        flags.add(OVERFLOWED)
    elif d2 < 0.0:
        d2 = 0.0
        flags.add(CLAMPED)
    return DistanceOutcome(d2, used_low, frozenset(flags))


def _vec(x):
    return np.asarray(x, dtype=np.float64).ravel()


def dist_sq_diff(x, y, fmt: FloatFormat = FP64) -> DistanceOutcome:
    """``(x - y)^T (x - y)`` with every scalar op rounded to ``fmt``."""
    x, y = _vec(x), _vec(y)
    if x.shape != y.shape or x.size == 0:
        raise ValueError("need two nonempty vectors of equal length")
    flags = set()
    diff = []
    for a, b in zip(x, y):
        rv = fl_op(a, b, "sub", fmt)
        flags |= rv.flags
        diff.append(rv.value)
    ip = inner_product(diff, diff, fmt)
    return _clean(ip.value, flags | ip.flags)


def dist_sq_gram(xx: float, yy: float, x, y, fmt: FloatFormat = FP64) -> DistanceOutcome:
    """``xx - 2 x^T y + yy`` from precomputed squared norms."""
    x, y = _vec(x), _vec(y)
    if x.shape != y.shape or x.size == 0:
        raise ValueError("need two nonempty vectors of equal length")
    ip = inner_product(x, y, fmt)
    two = fl_op(2.0, ip.value, "mul", fmt)
    a = fl_op(xx, two.value, "sub", fmt)
    d = fl_op(a.value, yy, "add", fmt)
    return _clean(d.value, ip.flags | two.flags | a.flags | d.flags)


def trigger_fires(pp: float, cc: float, delta: float) -> bool:
    """Magnitude-ratio test ``max(pp/cc, cc/pp) >= delta**2``.

    A single zero norm counts as an infinite ratio; two zero norms never
    trigger.
    """
    if pp == 0.0 and cc == 0.0:
        return False
    if pp == 0.0 or cc == 0.0:
        return True
    return max(pp / cc, cc / pp) >= delta * delta


def dist_sq_mixed(p, c, pp: float, cc: float, ctx: PrecisionContext) -> DistanceOutcome:
    """Distance with the cross term in ``ctx.low`` when the norms differ enough.

    On a trigger both vectors are scaled by their infinity norms, the scaled
    inner product is formed entirely in the low format and the rest of the
    formula stays in the working format.
    """
    p, c = _vec(p), _vec(c)
    if p.shape != c.shape or p.size == 0:
        raise ValueError("need two nonempty vectors of equal length")
    work, low = ctx.work, ctx.low
    trig = trigger_fires(pp, cc, ctx.delta)
    ctx.record(1, int(trig))
    if not trig or low == work:
        out = dist_sq_gram(pp, cc, p, c, work)
        return DistanceOutcome(out.d2, trig, out.flags)

    flags = set()

    def scaled(v):
        s = float(np.max(np.abs(v)))
        if s == 0.0:
            return s, np.zeros_like(v)
        vals = []
        for a in v:
            q = fl_op(a, s, "div", work)
            rv = round_to_format(q.value, low)
            flags.update(rv.flags)
            vals.append(rv.value)
        return s, np.array(vals)

    s1, pt = scaled(p)
    s2, ct = scaled(c)
    ip = inner_product(pt, ct, low)
    flags |= ip.flags
    t = fl_op(2.0, s1, "mul", work).value
    t = fl_op(t, ip.value, "mul", work).value
    t = fl_op(t, s2, "mul", work).value
    d = fl_op(fl_op(pp, t, "sub", work).value, cc, "add", work)
    return _clean(d.value, flags | d.flags, used_low=True)


# ---------------------------------------------------------------------------
# forward error bounds
# ---------------------------------------------------------------------------


def _abs_dot(x, y):
    return math.fsum(np.abs(x) * np.abs(y))


def bound_diff_formula(x, y, fmt: FloatFormat) -> float:
    """``gamma_{r+2} |d|`` for the difference formula."""
    x, y = _vec(x), _vec(y)
    d = math.fsum((x - y) ** 2)
    if d == 0.0:
        return 0.0
    return gamma(x.size + 2, fmt) * d


def bound_gram_formula(x, y, fmt: FloatFormat) -> float:
    """``gamma_{r+2} (x^T x + 2|x|^T|y| + y^T y)`` for the Gram formula."""
    x, y = _vec(x), _vec(y)
    s = math.fsum(x * x) + 2.0 * _abs_dot(x, y) + math.fsum(y * y)
    if s == 0.0:
        return 0.0
    return gamma(x.size + 2, fmt) * s


def bound_mixed_formula(x, y, ctx: PrecisionContext) -> float:
    """First-order bound when only ``x^T y`` is done in the low format.

    ``(r+2) u (x^T x + y^T y) + 2 (r+2) u_low |x|^T |y|``
    """
    x, y = _vec(x), _vec(y)
    r2 = x.size + 2
    return r2 * ctx.work.u * (math.fsum(x * x) + math.fsum(y * y)) + 2.0 * r2 * ctx.low.u * _abs_dot(x, y)


def inner_product_condition(x, y) -> float:
    """Relative condition number of ``x^T y`` in the 2-norm, i.e. ``1/cos(angle)``."""
    x, y = _vec(x), _vec(y)
    nx, ny = float(np.linalg.norm(x)), float(np.linalg.norm(y))
    if nx == 0.0 or ny == 0.0:
        raise ValueError("condition number undefined for a zero vector")
    dot = abs(math.fsum(x * y))
    if dot == 0.0:
        return math.inf
    return nx * ny / dot


def kernel_matrix_diff(points, fmt: FloatFormat = FP64, relative: bool = False) -> float:
    """Frobenius norm of the gap between the two all-pairs distance matrices.

    ``points`` is a :class:`~mixkmeans.data.Dataset` or an (n, r) array of
    rows. With ``relative=True`` the norm is divided by that of the
    difference-formula matrix.
    """
    X = points.X if hasattr(points, "X") else np.atleast_2d(np.asarray(points, dtype=np.float64))
    Xr = round_array(X, fmt)
    d_diff = kernels.diff_block(Xr, Xr, fmt)
    xx = kernels.row_norms(Xr, fmt)
    d_gram = kernels.gram_block(Xr, Xr, xx, xx, fmt)
    bad = int((~np.isfinite(d_diff)).sum() + (~np.isfinite(d_gram)).sum())
    if bad:
        raise FloatingPointError(f"{bad} distance entries overflowed in {fmt.name}")
    d_gram = np.maximum(d_gram, 0.0)
    val = float(np.linalg.norm(d_diff - d_gram))
    if relative:
        ref = float(np.linalg.norm(d_diff))
        return val / ref if ref else 0.0
    return val


# ---------------------------------------------------------------------------
# block evaluation used by k-means
# ---------------------------------------------------------------------------


class BlockDistance:
    """Distances from every point of ``X`` (n, r) to a block of centers.

    ``mode`` picks the scheme: ``working`` is the Gram formula in float64,
    ``low`` is the Gram formula with every op (norms included) in
    ``ctx.low``, ``mixed`` is the trigger-gated scheme. Point norms are
    computed once; each call updates the context counters.
    """

    def __init__(self, X, mode: str, ctx: Optional[PrecisionContext] = None):
        if mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
        self.ctx = ctx if ctx is not None else PrecisionContext()
        if not self.ctx.work.is_working:
            raise NotImplementedError("block kernels run with float64 as the working format")
        self.mode = mode
        self.X = np.ascontiguousarray(X, dtype=np.float64)
        if mode == "low":
            self._Xk = round_array(self.X, self.ctx.low)
            self._xx = kernels.row_norms(self._Xk, self.ctx.low)
        else:
            self._Xk = self.X
            self._xx = kernels.row_norms(self.X, FP64)

    @property
    def point_norms(self) -> np.ndarray:
        return self._xx

    def __call__(self, C, rows=None) -> np.ndarray:
        C = np.atleast_2d(np.asarray(C, dtype=np.float64))
        Xk = self._Xk if rows is None else self._Xk[rows]
        xx = self._xx if rows is None else self._xx[rows]
        if self.mode == "working":
            D = kernels.gram_block(Xk, C, xx, kernels.row_norms(C, FP64), FP64)
            self.ctx.record(D.size, 0)
        elif self.mode == "low":
            low = self.ctx.low
            Cr = round_array(C, low)
            D = kernels.gram_block(Xk, Cr, xx, kernels.row_norms(Cr, low), low)
            self.ctx.record(D.size, D.size)
        else:
            cc = kernels.row_norms(C, FP64)
            D, n_trig = kernels.mixed_block(Xk, C, xx, cc, self.ctx.delta, self.ctx.low)
            self.ctx.record(D.size, n_trig)
        return kernels.sanitize(D)


def working_distances(X, C) -> np.ndarray:
    """Float64 Gram-formula distances without touching any counters."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    C = np.atleast_2d(np.asarray(C, dtype=np.float64))
    D = kernels.gram_block(X, C, kernels.row_norms(X, FP64), kernels.row_norms(C, FP64), FP64)
    return kernels.sanitize(D)
