"""Emulated reduced-precision arithmetic inside host doubles.

A value is representable in ``Precision(t)`` if it can be written as
``m * 2**(e - t)`` with ``|m| < 2**t`` integral.  The exponent range is
deliberately unbounded: no overflow, underflow or subnormals.  Every
emulated operation computes the exact-in-double intermediate, rounds it
to t significand bits, and records the realized relative roundoff.

Round-to-nearest uses ties-to-even.  Stochastic rounding rounds to the
upper neighbor with probability equal to the fractional distance from
the lower neighbor, drawing exactly one uniform per inexact operation;
values that are already representable consume no randomness.

The recorded delta is defined against the host-double intermediate.
For t <= 26 the sum of two t-bit values is itself exact in double, so
delta is the true relative roundoff of the emulated operation.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Precision",
    "RoundingMode",
    "RoundoffRecord",
    "round_value",
    "round_vector",
    "emulated_add",
    "emulated_sub",
    "emulated_mul",
]


@dataclass(frozen=True)
class Precision:
    """A t-bit significand format (implicit leading bit included in t).

    The unit roundoff to nearest is u = 2**-t.
    """

    t: int

    def __post_init__(self) -> None:
        if not isinstance(self.t, int) or not 1 <= self.t <= 52:
            raise ValueError(f"significand bits must be an integer in [1, 52], got {self.t!r}")

    @property
    def u(self) -> float:
        return 2.0 ** -self.t


class RoundingMode(enum.Enum):
    NEAREST_TIES_EVEN = "rtn"
    STOCHASTIC = "sr"

    @property
    def bound_factor(self) -> float:
        """Factor on u bounding |delta|: 1 for nearest, 2 for stochastic."""
        return 1.0 if self is RoundingMode.NEAREST_TIES_EVEN else 2.0


@dataclass(frozen=True)
class RoundoffRecord:
    """One realized relative roundoff delta at operation ``op_id``.

    ``bound`` is u for round-to-nearest and 2u for stochastic rounding;
    |delta| <= bound always holds.  ``role`` labels the operation within
    its algorithm (plain tree additions use "sum").
    """

    delta: float
    op_id: int
    bound: float
    role: str = field(default="sum")


def _round_significand(mantissa: float, frac: float, mode: RoundingMode, rng) -> float:
    """Round a scaled significand: ``mantissa`` integral, ``frac`` in [0, 1)."""
    if frac == 0.0:
        return mantissa
    if mode is RoundingMode.NEAREST_TIES_EVEN:
        if frac > 0.5:
            return mantissa + 1.0
        if frac < 0.5:
            return mantissa
        # Tie: the even neighbor wins; floor() went toward -inf so the
        # upper neighbor is mantissa + 1.
        return mantissa + 1.0 if math.fmod(mantissa, 2.0) != 0.0 else mantissa
    if rng is None:
        raise ValueError("stochastic rounding requires an RNG stream")
    return mantissa + 1.0 if rng.random() < frac else mantissa


def round_value(x: float, p: Precision, mode: RoundingMode, rng=None) -> float:
    """Round a finite host double to t significand bits.

    Stochastic mode draws one uniform from ``rng`` iff x is not already
    representable.  Idempotent, and monotone under round-to-nearest.
    """
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"cannot round non-finite value {x!r}")
    if x == 0.0:
        return x
    m, e = math.frexp(x)  # x = m * 2**e with 0.5 <= |m| < 1
    scaled = math.ldexp(m, p.t)  # exact: power-of-two scaling
    mantissa = math.floor(scaled)
    frac = scaled - mantissa  # exact: same-binade subtraction
    rounded = _round_significand(float(mantissa), frac, mode, rng)
    return math.ldexp(rounded, e - p.t)


def round_vector(x: np.ndarray, p: Precision, mode: RoundingMode, uniforms: np.ndarray | None = None) -> np.ndarray:
    """Vectorized round_value over a float64 array.

    Stochastic mode requires ``uniforms`` with x's shape: entry j decides
    the j-th rounding (used only where x[j] is inexact).  The tie rule and
    the probability law match the scalar path bit for bit.
    """
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise ValueError("cannot round non-finite values")
    m, e = np.frexp(x)
    scaled = np.ldexp(m, p.t)
    mantissa = np.floor(scaled)
    frac = scaled - mantissa
    if mode is RoundingMode.NEAREST_TIES_EVEN:
        # floor() went toward -inf, so the upper neighbor is always
        # mantissa + 1; on a tie the even one of the pair wins.
        up = frac > 0.5
        tie_to_odd_floor = (frac == 0.5) & (np.fmod(mantissa, 2.0) != 0.0)
        mantissa = mantissa + np.where(up | tie_to_odd_floor, 1.0, 0.0)
    else:
        if uniforms is None:
            raise ValueError("stochastic rounding requires a uniform array")
        mantissa = mantissa + np.where(uniforms < frac, 1.0, 0.0)
    return np.ldexp(mantissa, e - p.t)


def _record(result: float, z: float, op_id: int, p: Precision, mode: RoundingMode, role: str) -> RoundoffRecord:
    # (result - z) is exact by Sterbenz (result is z rounded, u <= 1/2), so
    # the recorded delta carries relative noise 2^-53 rather than the
    # absolute 2^-53 that result/z - 1 would give; the identity oracles
    # need that sharpness at t = 24.
    delta = (result - z) / z if z != 0.0 else 0.0
    return RoundoffRecord(delta=delta, op_id=op_id, bound=mode.bound_factor * p.u, role=role)


def emulated_add(
    x: float, y: float, p: Precision, mode: RoundingMode, rng=None, op_id: int = 0, role: str = "sum"
) -> tuple[float, RoundoffRecord]:
    """result = round(x + y); the record holds delta = result/(x+y) - 1."""
    z = x + y
    result = round_value(z, p, mode, rng)
    return result, _record(result, z, op_id, p, mode, role)


def emulated_sub(
    x: float, y: float, p: Precision, mode: RoundingMode, rng=None, op_id: int = 0, role: str = "sub"
) -> tuple[float, RoundoffRecord]:
    z = x - y
    result = round_value(z, p, mode, rng)
    return result, _record(result, z, op_id, p, mode, role)


def emulated_mul(
    x: float, y: float, p: Precision, mode: RoundingMode, rng=None, op_id: int = 0, role: str = "mul"
) -> tuple[float, RoundoffRecord]:
    z = x * y
    result = round_value(z, p, mode, rng)
    return result, _record(result, z, op_id, p, mode, role)
