"""Software emulation of reduced-precision floating-point arithmetic.

Values live in float64 and are rounded to a target format after every
scalar operation (round to nearest, ties to even). Gradual underflow is
kept and overflow goes to signed infinity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import FrozenSet, Sequence

import numpy as np

OVERFLOWED = "overflowed"
UNDERFLOWED_TO_ZERO = "underflowed_to_zero"
SUBNORMAL = "subnormal"
DIVIDE_BY_ZERO = "divide_by_zero"


@dataclass(frozen=True)
class FloatFormat:
    """A binary floating-point system with ``t`` significand digits.

    ``t`` counts the implicit leading bit. ``e_min`` is the exponent of the
    smallest positive normalized number and ``e_max`` that of the largest
    finite number.
    """

    name: str
    t: int
    e_min: int
    e_max: int

    def __post_init__(self):
        if not 2 <= self.t <= 53:
            raise ValueError(f"t must lie in [2, 53], got {self.t}")
        if self.e_min >= 0 or self.e_max <= 0:
            raise ValueError("need e_min < 0 < e_max")
        if self.e_min < -1022 or self.e_max > 1023:
            raise ValueError("format range exceeds float64")

    @property
    def u(self) -> float:
        return math.ldexp(1.0, -self.t)

    @property
    def x_min(self) -> float:
        return math.ldexp(1.0, self.e_min)

    @property
    def x_max(self) -> float:
        return math.ldexp(2.0 - math.ldexp(1.0, 1 - self.t), self.e_max)

    @property
    def smallest_subnormal(self) -> float:
        return math.ldexp(1.0, self.e_min - self.t + 1)

    @property
    def is_working(self) -> bool:
        """True for float64 itself, where rounding is the identity."""
        return self.t == 53 and self.e_min == -1022 and self.e_max == 1023

    def __str__(self):
        return self.name


Q52 = FloatFormat("q52", 3, -14, 15)
FP16 = FloatFormat("fp16", 11, -14, 15)
FP32 = FloatFormat("fp32", 24, -126, 127)
FP64 = FloatFormat("fp64", 53, -1022, 1023)

FORMATS = {f.name: f for f in (Q52, FP16, FP32, FP64)}


def get_format(name) -> FloatFormat:
    if isinstance(name, FloatFormat):
        return name
    try:
        return FORMATS[str(name).lower()]
    except KeyError:
        raise ValueError(f"unknown format {name!r}; expected one of {sorted(FORMATS)}") from None


@dataclass(frozen=True)
class RoundedValue:
    value: float
    format: FloatFormat
    flags: FrozenSet[str] = field(default_factory=frozenset)

    def __float__(self):
        return self.value


def round_scalar(x, t, e_min, x_max):
    """Nearest value of the (t, e_min, x_max) system to ``x``; a plain float.

    Written with ``math`` only so the kernels module can compile it with
    numba unchanged.
    """
    if t >= 53 and e_min <= -1022:
        return x
    if x == 0.0 or x != x or math.isinf(x):
        return x
    if abs(x) > 2.0 * x_max:
        return math.copysign(math.inf, x)
    e = math.frexp(x)[1] - 1
    if e < e_min:
        e = e_min
    q = e - t + 1
    y = math.ldexp(x, -q)
    # ties to even; exact since |y| < 2**t <= 2**52
    f = math.floor(y)
    d = y - f
    if d > 0.5 or (d == 0.5 and f % 2.0 != 0.0):
        f += 1.0
    res = math.ldexp(f, q)
    if abs(res) > x_max:
        return math.copysign(math.inf, x)
    return math.copysign(res, x)


def round_array(x, fmt: FloatFormat) -> np.ndarray:
    """Elementwise :func:`round_to_format` on an array, without flags."""
    x = np.asarray(x, dtype=np.float64)
    if fmt.is_working:
        return x.copy()
    _, e = np.frexp(x)
    q = np.maximum(e - 1, fmt.e_min) - (fmt.t - 1)
    with np.errstate(invalid="ignore", over="ignore"):
        out = np.ldexp(np.rint(np.ldexp(x, -q)), q)
        out = np.where(np.abs(out) > fmt.x_max, np.inf, out)
    return np.copysign(out, x)


def _flags_for(x, res, fmt):
    flags = set()
    if math.isinf(res) and not math.isinf(x):
        flags.add(OVERFLOWED)
    elif res == 0.0 and x != 0.0:
        flags.add(UNDERFLOWED_TO_ZERO)
    elif res != 0.0 and abs(res) < fmt.x_min:
        flags.add(SUBNORMAL)
    return flags


def round_to_format(x: float, fmt: FloatFormat) -> RoundedValue:
    x = float(x)
    res = round_scalar(x, fmt.t, fmt.e_min, fmt.x_max)
    return RoundedValue(res, fmt, frozenset(_flags_for(x, res, fmt)))


_OPS = {
    "add": lambda a, b: a + b,
    "sub": lambda a, b: a - b,
    "mul": lambda a, b: a * b,
}


def fl_op(x: float, y: float, op: str, fmt: FloatFormat) -> RoundedValue:
    """``fl(x op y)``: exact-in-float64 operation then one rounding."""
    x, y = float(x), float(y)
    extra = set()
    if op == "div":
        if y == 0.0:
            extra.add(DIVIDE_BY_ZERO)
            if x == 0.0 or x != x:
                exact = math.nan
            else:
                exact = math.copysign(math.inf, x) * math.copysign(1.0, y)
        else:
            exact = x / y
    elif op in _OPS:
        exact = _OPS[op](x, y)
    else:
        raise ValueError(f"unknown op {op!r}")
    rv = round_to_format(exact, fmt)
    if math.isinf(rv.value) and math.isfinite(x) and math.isfinite(y) and not extra:
        # float64 itself overflowed before rounding
        extra.add(OVERFLOWED)
    if extra:
        return RoundedValue(rv.value, fmt, rv.flags | extra)
    return rv


def inner_product(x: Sequence[float], y: Sequence[float], fmt: FloatFormat) -> RoundedValue:
    """Left-to-right dot product with every multiply and add rounded to ``fmt``."""
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape != y.shape or x.size == 0:
        raise ValueError("inner_product needs two nonempty vectors of equal length")
    flags = set()
    acc = 0.0
    for i in range(x.size):
        prod = fl_op(x[i], y[i], "mul", fmt)
        flags |= prod.flags
        if i == 0:
            acc = prod.value
        else:
            s = fl_op(acc, prod.value, "add", fmt)
            flags |= s.flags
            acc = s.value
    return RoundedValue(acc, fmt, frozenset(flags))


def gamma(r: int, fmt: FloatFormat) -> float:
    """``r u / (1 - r u)``, the accumulated-rounding constant."""
    ru = r * fmt.u
    if ru >= 1.0:
        raise ValueError(
            f"gamma undefined: r*u = {ru:g} >= 1 for r={r} in {fmt.name}; "
            "the format is too coarse for this length"
        )
    return ru / (1.0 - ru)
