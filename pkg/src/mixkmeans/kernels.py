"""Hot loops: blocked squared-distance kernels and cluster sums.

Every kernel exists twice, as scalar loops compiled with numba and as
vectorized numpy. Both follow the same operation order (left-to-right
accumulation, rounding after each scalar op) and agree bit for bit. The
active implementation comes from ``MIXKMEANS_BACKEND`` and can be switched
with :func:`use_backend`.

Kernels return raw values; callers clean them with :func:`sanitize`.
"""

import math
from contextlib import contextmanager

import numpy as np

from . import _accel
from .simfloat import FP64, FloatFormat, round_array, round_scalar

_backend = _accel.BACKEND


def get_backend() -> str:
    return _backend


def set_backend(name: str) -> None:
    global _backend
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not _accel.NUMBA_AVAILABLE:
        raise RuntimeError("numba is not installed")
    _backend = name


@contextmanager
def use_backend(name: str):
    prev = _backend
    set_backend(name)
    try:
        yield
    finally:
        set_backend(prev)


def _fmt_args(fmt: FloatFormat):
    return fmt.t, fmt.e_min, fmt.x_max


# ---------------------------------------------------------------------------
# numba path
# ---------------------------------------------------------------------------

_round_general = _accel.njit(cache=True)(round_scalar)


@_accel.njit(cache=True)
def _round(x, t, e_min, x_max):
    """Same result as ``round_scalar``, faster.

    Adding then subtracting ``2**(e - t + 53)`` leaves ``|x|`` rounded to a
    multiple of its quantum ``2**(e - t + 1)`` by the hardware's own
    round-to-nearest-even; ``e`` is clamped to ``e_min`` for subnormals.
    """
    if t >= 53:
        if e_min <= -1022:
            return x
        return _round_general(x, t, e_min, x_max)
    if x == 0.0 or x - x != 0.0:  # zero, inf, nan
        return x
    ax = abs(x)
    if ax > 2.0 * x_max:
        return math.copysign(math.inf, x)
    e = ((np.float64(ax).view(np.int64) >> 52) & 0x7FF) - 1023
    if e < e_min:
        e = e_min
    big = np.int64((e - t + 53 + 1023) << 52).view(np.float64)
    res = (ax + big) - big
    if res > x_max:
        return math.copysign(math.inf, x)
    return math.copysign(res, x)


@_accel.njit(cache=True)
def _dot_nb(A, i, B, j, t, e_min, x_max):
    acc = _round(A[i, 0] * B[j, 0], t, e_min, x_max)
    for l in range(1, A.shape[1]):
        acc = _round(acc + _round(A[i, l] * B[j, l], t, e_min, x_max), t, e_min, x_max)
    return acc


@_accel.njit(cache=True)
def _dot64_nb(A, i, B, j):
    acc = A[i, 0] * B[j, 0]
    for l in range(1, A.shape[1]):
        acc += A[i, l] * B[j, l]
    return acc


@_accel.njit(cache=True)
def _row_norms_nb(X, t, e_min, x_max):
    n = X.shape[0]
    out = np.empty(n)
    for i in range(n):
        out[i] = _dot_nb(X, i, X, i, t, e_min, x_max)
    return out


@_accel.njit(cache=True)
def _gram_nb(X, C, xx, cc, t, e_min, x_max):
    n, k = X.shape[0], C.shape[0]
    D = np.empty((n, k))
    for i in range(n):
        for j in range(k):
            ip = _dot_nb(X, i, C, j, t, e_min, x_max)
            two_ip = _round(2.0 * ip, t, e_min, x_max)
            D[i, j] = _round(_round(xx[i] - two_ip, t, e_min, x_max) + cc[j], t, e_min, x_max)
    return D


@_accel.njit(cache=True)
def _gram64_nb(X, C, xx, cc):
    n, k = X.shape[0], C.shape[0]
    D = np.empty((n, k))
    for i in range(n):
        for j in range(k):
            D[i, j] = (xx[i] - 2.0 * _dot64_nb(X, i, C, j)) + cc[j]
    return D


@_accel.njit(cache=True)
def _inf_norm_scaled_nb(X, t, e_min, x_max):
    n, r = X.shape
    s = np.empty(n)
    Xs = np.zeros((n, r))
    for i in range(n):
        m = 0.0
        for l in range(r):
            a = abs(X[i, l])
            if a > m:
                m = a
        s[i] = m
        if m > 0.0:
            for l in range(r):
                Xs[i, l] = _round(X[i, l] / m, t, e_min, x_max)
    return s, Xs


@_accel.njit(cache=True)
def _mixed_nb(X, C, xx, cc, delta2, t, e_min, x_max, low_is_work):
    n, k = X.shape[0], C.shape[0]
    D = np.empty((n, k))
    s1, Xs = _inf_norm_scaled_nb(X, t, e_min, x_max)
    s2, Cs = _inf_norm_scaled_nb(C, t, e_min, x_max)
    n_trig = 0
    for i in range(n):
        for j in range(k):
            pp = xx[i]
            qq = cc[j]
            if pp == 0.0 and qq == 0.0:
                trig = False
            elif pp == 0.0 or qq == 0.0:
                trig = True
            else:
                trig = max(pp / qq, qq / pp) >= delta2
            if trig:
                n_trig += 1
            if trig and not low_is_work:
                ip = _dot_nb(Xs, i, Cs, j, t, e_min, x_max)
                D[i, j] = (pp - 2.0 * s1[i] * ip * s2[j]) + qq
            else:
                D[i, j] = (pp - 2.0 * _dot64_nb(X, i, C, j)) + qq
    return D, n_trig


@_accel.njit(cache=True)
def _diff_nb(X, Y, t, e_min, x_max):
    n, m, r = X.shape[0], Y.shape[0], X.shape[1]
    D = np.empty((n, m))
    for i in range(n):
        for j in range(m):
            d = _round(X[i, 0] - Y[j, 0], t, e_min, x_max)
            acc = _round(d * d, t, e_min, x_max)
            for l in range(1, r):
                d = _round(X[i, l] - Y[j, l], t, e_min, x_max)
                acc = _round(acc + _round(d * d, t, e_min, x_max), t, e_min, x_max)
            D[i, j] = acc
    return D


@_accel.njit(cache=True)
def _cluster_sums_nb(X, labels, k):
    n, r = X.shape
    sums = np.zeros((k, r))
    counts = np.zeros(k, dtype=np.int64)
    for i in range(n):
        j = labels[i]
        counts[j] += 1
        for l in range(r):
            sums[j, l] += X[i, l]
    return sums, counts


# ---------------------------------------------------------------------------
# numpy path
# ---------------------------------------------------------------------------


def _dot_np(A, B, fmt):
    """All pairwise rounded dot products, shape (len(A), len(B))."""
    R = (lambda v: v) if fmt.is_working else (lambda v: round_array(v, fmt))
    acc = R(A[:, 0, None] * B[None, :, 0])
    for i in range(1, A.shape[1]):
        acc = R(acc + R(A[:, i, None] * B[None, :, i]))
    return acc


def _row_norms_np(X, fmt):
    R = (lambda v: v) if fmt.is_working else (lambda v: round_array(v, fmt))
    acc = R(X[:, 0] * X[:, 0])
    for i in range(1, X.shape[1]):
        acc = R(acc + R(X[:, i] * X[:, i]))
    return acc


def _gram_np(X, C, xx, cc, fmt):
    R = (lambda v: v) if fmt.is_working else (lambda v: round_array(v, fmt))
    with np.errstate(over="ignore", invalid="ignore"):
        ip = _dot_np(X, C, fmt)
        return R(R(xx[:, None] - R(2.0 * ip)) + cc[None, :])


def _inf_norm_scaled_np(X, fmt):
    s = np.abs(X).max(axis=1)
    safe = np.where(s > 0.0, s, 1.0)
    Xs = np.where(s[:, None] > 0.0, round_array(X / safe[:, None], fmt), 0.0)
    return s, Xs


def _mixed_np(X, C, xx, cc, delta2, low):
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        pp = xx[:, None]
        qq = cc[None, :]
        ratio = np.maximum(pp / qq, qq / pp)
        trig = ratio >= delta2
        pz, qz = pp == 0.0, qq == 0.0
        trig = np.where(pz & qz, False, np.where(pz | qz, True, trig))
        n_trig = int(np.count_nonzero(trig))

        D = (pp - 2.0 * _dot_np(X, C, FP64)) + qq
        if n_trig and not low.is_working:
            s1, Xs = _inf_norm_scaled_np(X, low)
            s2, Cs = _inf_norm_scaled_np(C, low)
            ip = _dot_np(Xs, Cs, low)
            Dt = (pp - 2.0 * s1[:, None] * ip * s2[None, :]) + qq
            D = np.where(trig, Dt, D)
    return D, n_trig


def _diff_np(X, Y, fmt):
    R = (lambda v: v) if fmt.is_working else (lambda v: round_array(v, fmt))
    with np.errstate(over="ignore", invalid="ignore"):
        d = R(X[:, 0, None] - Y[None, :, 0])
        acc = R(d * d)
        for i in range(1, X.shape[1]):
            d = R(X[:, i, None] - Y[None, :, i])
            acc = R(acc + R(d * d))
    return acc


def _cluster_sums_np(X, labels, k):
    sums = np.zeros((k, X.shape[1]))
    np.add.at(sums, labels, X)
    counts = np.bincount(labels, minlength=k).astype(np.int64)
    return sums, counts


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------


def _as2d(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def row_norms(X, fmt: FloatFormat) -> np.ndarray:
    """Rounded ``x^T x`` for every row of ``X`` (rows already in ``fmt``)."""
    X = _as2d(X)
    if _backend == "numba":
        return _row_norms_nb(X, *_fmt_args(fmt))
    return _row_norms_np(X, fmt)


def gram_block(X, C, xx, cc, fmt: FloatFormat) -> np.ndarray:
    """``xx - 2 x^T c + cc`` for all row pairs, every op rounded to ``fmt``."""
    X, C = _as2d(X), _as2d(C)
    xx, cc = _as2d(xx), _as2d(cc)
    if _backend == "numba":
        if fmt.is_working:
            return _gram64_nb(X, C, xx, cc)
        return _gram_nb(X, C, xx, cc, *_fmt_args(fmt))
    return _gram_np(X, C, xx, cc, fmt)


def mixed_block(X, C, xx, cc, delta: float, low: FloatFormat):
    """Magnitude-triggered mixed-precision distances.

    Returns ``(D, n_triggered)``. ``xx`` and ``cc`` are float64 norms.
    """
    X, C = _as2d(X), _as2d(C)
    xx, cc = _as2d(xx), _as2d(cc)
    delta2 = float(delta) * float(delta)
    if _backend == "numba":
        D, n_trig = _mixed_nb(X, C, xx, cc, delta2, *_fmt_args(low), low.is_working)
        return D, int(n_trig)
    return _mixed_np(X, C, xx, cc, delta2, low)


def diff_block(X, Y, fmt: FloatFormat) -> np.ndarray:
    """``(x - y)^T (x - y)`` for all row pairs, every op rounded to ``fmt``."""
    X, Y = _as2d(X), _as2d(Y)
    if _backend == "numba":
        return _diff_nb(X, Y, *_fmt_args(fmt))
    return _diff_np(X, Y, fmt)


def cluster_sums(X, labels, k: int):
    """Per-cluster coordinate sums in point order, plus cardinalities."""
    X = _as2d(X)
    labels = np.ascontiguousarray(labels, dtype=np.int64)
    if _backend == "numba":
        return _cluster_sums_nb(X, labels, int(k))
    return _cluster_sums_np(X, labels, int(k))


def sanitize(D: np.ndarray) -> np.ndarray:
    """NaN (from inf - inf) becomes +inf; negatives are clamped to zero."""
    D = np.where(np.isnan(D), np.inf, D)
    return np.maximum(D, 0.0)
