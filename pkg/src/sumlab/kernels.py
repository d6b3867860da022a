"""Traced summation kernels.

Each kernel executes one algorithm family in emulated precision and
returns a fully traced run: computed values, exact reference values
(double-double), and every elementary roundoff labeled by node and
role.  Inputs are pre-rounded to the precision of the node that
consumes them; that quantization is reported separately and excluded
from the run's error, so the error is the pure summation error of
exactly representable inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .refsum import dd_cumsum, dd_sub_d_dd, dd_sum, two_prod, two_sum
from .rounding import Precision, RoundingMode, RoundoffRecord, emulated_add, emulated_mul, emulated_sub, round_value
from .trees import CompTree, build_fabsum, build_sequential, exact_partial_sums_dd, is_leaf_ref

__all__ = [
    "TracedRun",
    "ShiftedRun",
    "CompensatedTrace",
    "run_tree_sum",
    "run_shifted_sum",
    "choose_shift",
    "run_compensated",
    "run_fabsum",
]


@dataclass
class TracedRun:
    """One summation run with its complete roundoff trace.

    computed[k] is the machine partial sum at internal node k (entries 0
    and 1 are NaN); exact_hi[k] + exact_lo[k] is the error-free partial
    sum of the same leaves.  input_quantization[i] is the relative error
    of pre-rounding x_i into its consuming node's precision; it is not
    part of error().
    """

    algorithm: str
    tree: CompTree | None
    x: np.ndarray
    computed: np.ndarray
    exact_hi: np.ndarray
    exact_lo: np.ndarray
    trace: list[RoundoffRecord]
    input_quantization: np.ndarray
    mode: RoundingMode

    @property
    def n(self) -> int:
        return len(self.x)

    @property
    def exact(self) -> np.ndarray:
        """Exact partial sums collapsed to doubles (entry 0 unused)."""
        return self.exact_hi + self.exact_lo

    @property
    def exact_sum(self) -> tuple[float, float]:
        return float(self.exact_hi[self.n]), float(self.exact_lo[self.n])

    @property
    def computed_sum(self) -> float:
        return float(self.computed[self.n])

    def error(self) -> float:
        """e_n = computed minus exact, with the cancellation done exactly."""
        hi, lo = dd_sub_d_dd(self.computed_sum, self.exact_sum)
        return hi + lo

    def relative_error(self) -> float:
        hi, lo = self.exact_sum
        return abs(self.error()) / abs(hi + lo)


@dataclass
class ShiftedRun(TracedRun):
    """Shifted summation: y_k = x_k - c are summed over the tree, then
    the shift mass y_{n+1} = n*c is added back.

    The inherited computed/exact arrays describe the inner tree over the
    y values; y_hat[k] holds the computed y_k for k=1..n+1 and final_sum
    holds the machine result.  exact_sum is the error-free sum of x.
    """

    c: float = 0.0
    y_hat: np.ndarray = field(default_factory=lambda: np.zeros(0))
    y_exact_hi: np.ndarray = field(default_factory=lambda: np.zeros(0))
    y_exact_lo: np.ndarray = field(default_factory=lambda: np.zeros(0))
    final_sum: float = 0.0
    x_sum_hi: float = 0.0
    x_sum_lo: float = 0.0

    @property
    def exact_sum(self) -> tuple[float, float]:
        return self.x_sum_hi, self.x_sum_lo

    @property
    def computed_sum(self) -> float:
        return self.final_sum


@dataclass
class CompensatedTrace:
    """Per-step values and roundoffs of the compensated loop.

    Arrays are indexed by step k (0..n); entries below 2 are unused
    except s_hat[1] = x_1 and c_hat[1] = 0.  eta[2] = 0 because the
    first correction subtracts an exact zero.
    """

    y_hat: np.ndarray
    s_hat: np.ndarray
    z_hat: np.ndarray
    c_hat: np.ndarray
    eta: np.ndarray
    sigma: np.ndarray
    delta: np.ndarray
    beta: np.ndarray


def _leaf_parent_precision(tree: CompTree) -> np.ndarray:
    """t bits of the node consuming each leaf, indexed 0..n-1."""
    t = np.zeros(tree.n, dtype=np.int64)
    for k in tree.internal_nodes:
        for ref in tree.children(k):
            if is_leaf_ref(ref):
                t[-ref - 1] = tree.precision_t[k]
    return t


def _quantize_inputs(tree: CompTree, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Pre-round each input to its consuming node's precision (to nearest).

    Returns (quantized inputs, per-input relative errors).
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (tree.n,):
        raise ValueError(f"expected {tree.n} inputs, got shape {x.shape}")
    t_bits = _leaf_parent_precision(tree)
    xq = np.empty_like(x)
    for i, (v, t) in enumerate(zip(x.tolist(), t_bits.tolist())):
        xq[i] = round_value(v, Precision(t), RoundingMode.NEAREST_TIES_EVEN)
    with np.errstate(divide="ignore", invalid="ignore"):
        quant = np.where(x != 0.0, xq / x - 1.0, 0.0)
    return xq, quant


def run_tree_sum(tree: CompTree, x: np.ndarray, mode: RoundingMode, rng=None) -> TracedRun:
    """Sum x over the tree, one emulated addition per internal node."""
    xq, quant = _quantize_inputs(tree, x)
    exact_hi, exact_lo = exact_partial_sums_dd(tree, xq)
    computed = np.full(tree.n + 1, np.nan)
    trace: list[RoundoffRecord] = []

    def operand(ref: int) -> float:
        return float(xq[-ref - 1]) if is_leaf_ref(ref) else float(computed[ref])

    for k in tree.internal_nodes:
        l, r = tree.children(k)
        p = tree.node_precision(k)
        s, rec = emulated_add(operand(l), operand(r), p, mode, rng, op_id=k, role="sum")
        computed[k] = s
        trace.append(rec)
    return TracedRun(
        algorithm="tree",
        tree=tree,
        x=xq,
        computed=computed,
        exact_hi=exact_hi,
        exact_lo=exact_lo,
        trace=trace,
        input_quantization=quant,
        mode=mode,
    )


def choose_shift(x: np.ndarray, p: Precision) -> float:
    """Midpoint of the extreme summands, rounded into the working precision."""
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0:
        raise ValueError("empty input")
    mid = (float(np.min(x)) + float(np.max(x))) / 2.0
    return round_value(mid, p, RoundingMode.NEAREST_TIES_EVEN)


def run_shifted_sum(tree: CompTree, x: np.ndarray, c: float, mode: RoundingMode, rng=None) -> ShiftedRun:
    """Shifted summation: subtract c from every term, sum the shifted
    terms over the tree, then add back n*c.

    The trace holds, in execution order, n subtractions, one
    multiplication, n-1 tree additions, and one closing addition.
    """
    if not np.isfinite(c):
        raise ValueError("shift must be finite")
    n = tree.n
    xq, quant = _quantize_inputs(tree, x)
    leaf_t = _leaf_parent_precision(tree)
    root_p = tree.node_precision(tree.root)

    trace: list[RoundoffRecord] = []
    y_hat = np.zeros(n + 2)
    y_hi = np.zeros(n + 2)
    y_lo = np.zeros(n + 2)
    for i in range(n):
        # the subtraction shares the precision of the node consuming y_k
        p_i = Precision(int(leaf_t[i]))
        y, rec = emulated_sub(float(xq[i]), c, p_i, mode, rng, op_id=i + 1, role="shift")
        y_hat[i + 1] = y
        y_hi[i + 1], y_lo[i + 1] = two_sum(float(xq[i]), -c)
        trace.append(rec)
    y_np1, rec = emulated_mul(float(n), c, root_p, mode, rng, op_id=n + 1, role="scale")
    y_hat[n + 1] = y_np1
    y_hi[n + 1], y_lo[n + 1] = two_prod(float(n), c)
    trace.append(rec)

    # reference partial sums use the exact y values, not the rounded ones
    exact_hi, exact_lo = exact_partial_sums_dd(tree, y_hi[1 : n + 1], y_lo[1 : n + 1])
    computed = np.full(n + 1, np.nan)

    def operand(ref: int) -> float:
        return float(y_hat[-ref]) if is_leaf_ref(ref) else float(computed[ref])

    for k in tree.internal_nodes:
        l, r = tree.children(k)
        s, rec = emulated_add(operand(l), operand(r), tree.node_precision(k), mode, rng, op_id=k, role="sum")
        computed[k] = s
        trace.append(rec)

    final, rec = emulated_add(float(computed[n]), float(y_hat[n + 1]), root_p, mode, rng, op_id=n + 1, role="final")
    trace.append(rec)
    x_hi, x_lo = dd_sum(xq)
    return ShiftedRun(
        algorithm="shifted",
        tree=tree,
        x=xq,
        computed=computed,
        exact_hi=exact_hi,
        exact_lo=exact_lo,
        trace=trace,
        input_quantization=quant,
        mode=mode,
        c=c,
        y_hat=y_hat,
        y_exact_hi=y_hi,
        y_exact_lo=y_lo,
        final_sum=final,
        x_sum_hi=x_hi,
        x_sum_lo=x_lo,
    )


def run_compensated(
    x: np.ndarray, p: Precision, mode: RoundingMode, rng=None
) -> tuple[TracedRun, CompensatedTrace]:
    """Compensated sequential summation with a traced correction term.

    Per step: y_k = x_k - c_{k-1}; s_k = s_{k-1} + y_k; z_k = s_k - s_{k-1};
    c_k = z_k - y_k.  Four roundoff records per step, roles y/s/z/c; the
    first y record is exact because c_1 = 0.
    """
    x = np.asarray(x, dtype=np.float64)
    n = len(x)
    if n < 2:
        raise ValueError("need at least two summands")
    xq = np.array([round_value(float(v), p, RoundingMode.NEAREST_TIES_EVEN) for v in x])
    with np.errstate(divide="ignore", invalid="ignore"):
        quant = np.where(x != 0.0, xq / x - 1.0, 0.0)

    y_hat = np.zeros(n + 1)
    s_hat = np.zeros(n + 1)
    z_hat = np.zeros(n + 1)
    c_hat = np.zeros(n + 1)
    eta = np.zeros(n + 1)
    sigma = np.zeros(n + 1)
    delta = np.zeros(n + 1)
    beta = np.zeros(n + 1)
    trace: list[RoundoffRecord] = []

    s_hat[1] = xq[0]
    for k in range(2, n + 1):
        yk, rec_y = emulated_sub(float(xq[k - 1]), float(c_hat[k - 1]), p, mode, rng, op_id=k, role="y")
        sk, rec_s = emulated_add(float(s_hat[k - 1]), yk, p, mode, rng, op_id=k, role="s")
        zk, rec_z = emulated_sub(sk, float(s_hat[k - 1]), p, mode, rng, op_id=k, role="z")
        ck, rec_c = emulated_sub(zk, yk, p, mode, rng, op_id=k, role="c")
        y_hat[k], s_hat[k], z_hat[k], c_hat[k] = yk, sk, zk, ck
        eta[k], sigma[k], delta[k], beta[k] = rec_y.delta, rec_s.delta, rec_z.delta, rec_c.delta
        trace.extend([rec_y, rec_s, rec_z, rec_c])

    exact_hi, exact_lo = dd_cumsum(xq)
    # shift to 1-based node indexing: exact[k] = x_1 + ... + x_k
    ehi = np.zeros(n + 1)
    elo = np.zeros(n + 1)
    ehi[1:] = exact_hi
    elo[1:] = exact_lo
    computed = np.full(n + 1, np.nan)
    computed[1:] = s_hat[1:]
    run = TracedRun(
        algorithm="compensated",
        tree=None,
        x=xq,
        computed=computed,
        exact_hi=ehi,
        exact_lo=elo,
        trace=trace,
        input_quantization=quant,
        mode=mode,
    )
    comp = CompensatedTrace(
        y_hat=y_hat, s_hat=s_hat, z_hat=z_hat, c_hat=c_hat, eta=eta, sigma=sigma, delta=delta, beta=beta
    )
    return run, comp


def run_fabsum(
    x: np.ndarray,
    b: int,
    p_lo: Precision,
    p_hi: Precision,
    inner=build_sequential,
    outer=build_sequential,
    mode: RoundingMode = RoundingMode.NEAREST_TIES_EVEN,
    rng=None,
) -> TracedRun:
    """Blocked mixed-precision summation: blocks of b in p_lo, block sums
    combined in p_hi.  Equivalent to run_tree_sum on the blocked tree."""
    x = np.asarray(x, dtype=np.float64)
    tree = build_fabsum(len(x), b, inner=inner, outer=outer, p_lo=p_lo, p_hi=p_hi)
    run = run_tree_sum(tree, x, mode, rng)
    run.algorithm = "fabsum"
    return run
