"""Reference arithmetic: error-free transforms and double-double sums.

The error identities verified in this package are exact in real
arithmetic, and the test tolerances (relative 1e-10 over up to 1e4
terms) leave no room for the ~n*2^-53 drift of plain float64
accumulation.  Partial sums and error differences are therefore carried
as unevaluated (hi, lo) pairs with hi + lo exact to ~2^-106 relative.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "two_sum",
    "two_prod",
    "dd_add",
    "dd_add_d",
    "dd_sub",
    "dd_sub_d_dd",
    "dd_mul_d",
    "dd_mul",
    "dd_to_float",
    "dd_sum",
    "dd_cumsum",
    "exact_difference",
]

_SPLITTER = 134217729.0  # 2^27 + 1, Veltkamp split constant for binary64


def two_sum(a: float, b: float) -> tuple[float, float]:
    """Error-free sum: returns (s, e) with s = fl(a+b) and s + e = a + b exactly."""
    s = a + b
    bb = s - a
    e = (a - bb) + (b - (s - bb))
    return s, e


def two_prod(a: float, b: float) -> tuple[float, float]:
    """Error-free product: returns (p, e) with p = fl(a*b) and p + e = a*b exactly."""
    p = a * b
    ta = _SPLITTER * a
    ah = ta - (ta - a)
    al = a - ah
    tb = _SPLITTER * b
    bh = tb - (tb - b)
    bl = b - bh
    e = ((ah * bh - p) + ah * bl + al * bh) + al * bl
    return p, e


def dd_add(a: tuple[float, float], b: tuple[float, float]) -> tuple[float, float]:
    """Sum of two double-double values, accurate to ~2^-106 relative."""
    s, e = two_sum(a[0], b[0])
    e += a[1] + b[1]
    hi, lo = two_sum(s, e)
    return hi, lo


def dd_add_d(a: tuple[float, float], b: float) -> tuple[float, float]:
    s, e = two_sum(a[0], b)
    e += a[1]
    hi, lo = two_sum(s, e)
    return hi, lo


def dd_sub(a: tuple[float, float], b: tuple[float, float]) -> tuple[float, float]:
    return dd_add(a, (-b[0], -b[1]))


def dd_mul_d(a: tuple[float, float], b: float) -> tuple[float, float]:
    """Product of a double-double by a double."""
    p, e = two_prod(a[0], b)
    e += a[1] * b
    hi, lo = two_sum(p, e)
    return hi, lo


def dd_mul(a: tuple[float, float], b: tuple[float, float]) -> tuple[float, float]:
    """Product of two double-double values."""
    p, e = two_prod(a[0], b[0])
    e += a[0] * b[1] + a[1] * b[0]
    hi, lo = two_sum(p, e)
    return hi, lo


def dd_sub_d_dd(a: float, b: tuple[float, float]) -> tuple[float, float]:
    """a - b for double a and double-double b; keeps cancellation exact."""
    s, e = two_sum(a, -b[0])
    e -= b[1]
    hi, lo = two_sum(s, e)
    return hi, lo


def dd_to_float(a: tuple[float, float]) -> float:
    return a[0] + a[1]


def dd_sum(values) -> tuple[float, float]:
    """Double-double sum of an iterable of doubles, left to right."""
    hi, lo = 0.0, 0.0
    for v in values:
        hi, lo = dd_add_d((hi, lo), float(v))
    return hi, lo


def dd_cumsum(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Running double-double prefix sums of a float64 vector.

    Returns (hi, lo) arrays with hi[k] + lo[k] = values[0] + ... + values[k]
    exactly to double-double accuracy.
    """
    values = np.asarray(values, dtype=np.float64)
    hi = np.empty_like(values)
    lo = np.empty_like(values)
    h, l = 0.0, 0.0
    for k, v in enumerate(values.tolist()):
        h, l = dd_add_d((h, l), v)
        hi[k] = h
        lo[k] = l
    return hi, lo


def exact_difference(computed: float, exact: tuple[float, float]) -> float:
    """computed - exact as a double, with the cancellation done in double-double."""
    hi, lo = dd_sub_d_dd(computed, exact)
    return hi + lo
