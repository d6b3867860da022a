"""Vectorized many-trial execution of the summation kernels.

The scalar kernels trace every roundoff, which the error identities
need but which is far too slow for thousand-trial experiments.  This
module runs many independent trials of one configuration at once:
matrices hold one column per trial, and internal nodes are processed
level by level, every node whose children are ready in one vectorized
step.  Rounding goes through the same primitive as the scalar path, so
a batch column equals the corresponding scalar run bit for bit under
round-to-nearest.

Stochastic rounding draws are laid out differently by design: the
scalar kernels consume one uniform per inexact operation, while the
batch gives every operation a fixed uniform slot regardless of
exactness.  An exact operation wastes its variate, which changes
nothing statistically, and the fixed layout makes results independent
of execution order and trial chunking.

Bound evaluation is vectorized over the same matrices and mirrors the
scalar bound engine; under stochastic rounding every bound is
evaluated with u doubled.
"""

from __future__ import annotations

from dataclasses import dataclass

import math

import numpy as np

from .bounds import ProbBudget, _alpha, _gamma, _lam, _phi
from .kernels import _leaf_parent_precision
from .refsum import two_prod
from .rounding import Precision, RoundingMode, round_vector
from .trees import CompTree, TreeStats, tree_stats

__all__ = [
    "LevelSchedule",
    "level_schedule",
    "batch_quantize",
    "BatchTreeResult",
    "batch_tree_sum",
    "batch_tree_bounds",
    "BatchShiftedResult",
    "batch_shifted_sum",
    "batch_shifted_bounds",
    "BatchCompensatedResult",
    "batch_compensated",
]


def _two_sum(a, b):
    # error-free transform, elementwise on arrays
    s = a + b
    bb = s - a
    return s, (a - bb) + (b - (s - bb))


def _row(refs: np.ndarray, n: int) -> np.ndarray:
    """Matrix row of a child reference: internal k at row k, leaf i at n+i."""
    return np.where(refs >= 0, refs, n - refs)


@dataclass
class LevelSchedule:
    """Execution plan for one tree: same-level, same-precision groups.

    Each group holds node ids whose children are all ready once earlier
    groups ran; ``rows`` maps ids and child refs into the (2n+1)-row
    value layout (internal node k at row k, leaf i at row n+i, rows 0
    and 1 unused).
    """

    n: int
    groups: list[tuple[np.ndarray, np.ndarray, np.ndarray, int]]
    height: int


def level_schedule(tree: CompTree) -> LevelSchedule:
    n = tree.n
    left, right, prec = tree.left, tree.right, tree.precision_t
    lvl = np.zeros(n + 1, dtype=np.int64)
    lv = lvl.tolist()
    for k in range(2, n + 1):
        l, r = int(left[k]), int(right[k])
        ll = lv[l] if l >= 0 else 0
        rr = lv[r] if r >= 0 else 0
        lv[k] = (ll if ll >= rr else rr) + 1
    lvl[2:] = lv[2:]
    order = np.argsort(lvl[2:], kind="stable") + 2
    levels = lvl[order]
    cuts = np.flatnonzero(np.diff(levels)) + 1
    groups = []
    for ids in np.split(order, cuts):
        for t in np.unique(prec[ids]):
            sub = ids[prec[ids] == t]
            groups.append((sub, _row(left[sub], n), _row(right[sub], n), int(t)))
    return LevelSchedule(n=n, groups=groups, height=int(levels[-1]) if n >= 2 else 0)


def batch_quantize(tree: CompTree, X: np.ndarray) -> np.ndarray:
    """Pre-round every trial's inputs to the consuming node's precision."""
    X = np.asarray(X, dtype=np.float64)
    if X.shape[0] != tree.n:
        raise ValueError(f"expected {tree.n} input rows, got {X.shape[0]}")
    t_bits = _leaf_parent_precision(tree)
    Xq = np.empty_like(X)
    for t in np.unique(t_bits):
        rows = t_bits == t
        Xq[rows] = round_vector(X[rows], Precision(int(t)), RoundingMode.NEAREST_TIES_EVEN)
    return Xq


@dataclass
class BatchTreeResult:
    """Per-trial outcomes of one vectorized tree-summation batch.

    ``s`` holds exact partial sums (rows 0 and 1 zero), one column per
    trial; ``error`` is computed minus exact with the cancellation done
    in double-double.
    """

    xq: np.ndarray
    s: np.ndarray
    computed: np.ndarray
    exact_hi: np.ndarray
    exact_lo: np.ndarray
    error: np.ndarray

    def rel_error(self) -> np.ndarray:
        return np.abs(self.error) / np.abs(self.exact_hi + self.exact_lo)


def _scan_tree(
    schedule: LevelSchedule,
    leaves: np.ndarray,
    leaves_hi: np.ndarray,
    leaves_lo: np.ndarray,
    mode: RoundingMode,
    uniforms: np.ndarray | None,
    slot_base: int = 0,
):
    """Run the emulated additions level by level over trial columns.

    Operation node k draws its uniform from row slot_base + k - 2.
    Returns the value/hi/lo matrices in the (2n+1)-row layout.
    """
    n = schedule.n
    chunk = leaves.shape[1]
    if mode is RoundingMode.STOCHASTIC and uniforms is None:
        raise ValueError("stochastic rounding requires a uniform matrix")
    V = np.zeros((2 * n + 1, chunk))
    H = np.zeros_like(V)
    L = np.zeros_like(V)
    V[n + 1 :] = leaves
    H[n + 1 :] = leaves_hi
    L[n + 1 :] = leaves_lo
    for ids, lr, rr, t in schedule.groups:
        z = V[lr] + V[rr]
        u = uniforms[slot_base + ids - 2] if mode is RoundingMode.STOCHASTIC else None
        V[ids] = round_vector(z, Precision(t), mode, u)
        hi, e = _two_sum(H[lr], H[rr])
        e = e + (L[lr] + L[rr])
        hi, lo = _two_sum(hi, e)
        H[ids] = hi
        L[ids] = lo
    return V, H, L


def _collapse(V, H, L, n):
    s = np.zeros((n + 1, V.shape[1]))
    s[2:] = H[2 : n + 1] + L[2 : n + 1]
    computed = V[n].copy()
    ehi, elo = H[n].copy(), L[n].copy()
    # computed - exact, exactly
    d, e = _two_sum(computed, -ehi)
    err_hi, err_lo = _two_sum(d, e - elo)
    return s, computed, ehi, elo, err_hi + err_lo


def batch_tree_sum(
    tree: CompTree,
    X: np.ndarray,
    mode: RoundingMode,
    uniforms: np.ndarray | None = None,
    schedule: LevelSchedule | None = None,
) -> BatchTreeResult:
    """Sum every column of X over the tree; uniform slot of node k is k-2."""
    if schedule is None:
        schedule = level_schedule(tree)
    Xq = batch_quantize(tree, X)
    V, H, L = _scan_tree(schedule, Xq, Xq, np.zeros_like(Xq), mode, uniforms)
    s, computed, ehi, elo, err = _collapse(V, H, L, tree.n)
    return BatchTreeResult(xq=Xq, s=s, computed=computed, exact_hi=ehi, exact_lo=elo, error=err)


def _f_scan_batch(schedule: LevelSchedule, s: np.ndarray, lam: float, w: np.ndarray):
    """Vectorized child-error recurrence; returns the whole-tree total."""
    n = schedule.n
    chunk = s.shape[1]
    S = np.zeros((2 * n + 1, chunk))
    S[2 : n + 1] = s[2:]
    F = np.zeros_like(S)
    G = np.zeros_like(S)
    w_row = np.zeros(2 * n + 1)
    w_row[2 : n + 1] = w[2:]
    for ids, lr, rr, _ in schedule.groups:
        g = (
            w_row[lr, None] * (np.abs(S[lr]) + F[lr]) ** 2 + G[lr]
            + w_row[rr, None] * (np.abs(S[rr]) + F[rr]) ** 2 + G[rr]
        )
        G[ids] = g
        F[ids] = lam * np.sqrt(g)
    return G[n] + w_row[n] * (np.abs(S[n]) + F[n]) ** 2


def batch_tree_bounds(
    tree: CompTree,
    s: np.ndarray,
    xq: np.ndarray,
    mode: RoundingMode,
    budget: ProbBudget = ProbBudget(),
    fabsum: tuple[int, float, float] | None = None,
    schedule: LevelSchedule | None = None,
    stats: TreeStats | None = None,
) -> dict[str, np.ndarray]:
    """Per-trial bounds over batch matrices, u doubled under SR.

    Mono-precision trees report the deterministic pair and the general
    probabilistic bounds; mixed trees report the weighted forms, plus
    the blocked two-stage bounds when ``fabsum = (b, u_lo, u_hi)``.
    """
    if schedule is None:
        schedule = level_schedule(tree)
    if stats is None:
        stats = tree_stats(tree)
    n = tree.n
    scale = mode.bound_factor
    lam = _lam(n, budget.eta)
    first = budget.first_order_factor
    abs_s_sum = np.sum(np.abs(s[2:]), axis=0)
    abs_x_sum = np.sum(np.abs(xq), axis=0)
    w = np.square(scale * np.ldexp(1.0, -tree.precision_t.astype(np.int64)))
    total = _f_scan_batch(schedule, s, lam, w)
    rec = first * np.sqrt(total)
    wh = stats.weighted_height * scale * scale
    one_phi = 1.0 + _phi(lam, wh)
    partial = first * one_phi * np.sqrt(np.einsum("k,kj->j", w[2:], np.square(s[2:])))
    inputs = math.sqrt(wh) * first * one_phi * abs_x_sum

    if tree.is_mono_precision():
        u = scale * 2.0 ** -int(tree.precision_t[2])
        lambda_h = (1.0 + u) ** stats.height
        return {
            "DET_PARTIAL": lambda_h * u * abs_s_sum,
            "DET_INPUTS": lambda_h * stats.height * u * abs_x_sum,
            "PROB_REC": rec,
            "PROB_CLOSED_PARTIAL": partial,
            "PROB_CLOSED_INPUTS": inputs,
        }
    report = {"MIX_REC": rec, "MIX_CLOSED_PARTIAL": partial, "MIX_CLOSED_INPUTS": inputs}
    if fabsum is not None:
        b, u_lo, u_hi = fabsum
        u_lo, u_hi = scale * u_lo, scale * u_hi
        wh_conv = b * u_lo * u_lo + (-(-n // b)) * u_hi * u_hi
        report["FABSUM_INPUTS"] = (
            math.sqrt(wh_conv) * first * (1.0 + _phi(lam, wh_conv)) * abs_x_sum
        )
        report["FABSUM_DET_FIRSTORDER"] = b * u_lo * abs_x_sum
    return report


@dataclass
class BatchShiftedResult:
    """Per-trial outcomes of one vectorized shifted-summation batch.

    ``y`` holds the exact shifted values (row k for y_k, row n+1 for the
    shift mass n*c); ``t`` the exact partial sums of the inner tree over
    them; ``s_hi/s_lo`` the exact sum of the original inputs.
    """

    xq: np.ndarray
    c: np.ndarray
    y: np.ndarray
    t: np.ndarray
    computed: np.ndarray
    s_hi: np.ndarray
    s_lo: np.ndarray
    error: np.ndarray
    inner_height: int

    def rel_error(self) -> np.ndarray:
        return np.abs(self.error) / np.abs(self.s_hi + self.s_lo)


def batch_shifted_sum(
    tree: CompTree,
    X: np.ndarray,
    mode: RoundingMode,
    uniforms: np.ndarray | None = None,
    schedule: LevelSchedule | None = None,
) -> BatchShiftedResult:
    """Shifted summation per column: shift by the rounded midrange of the
    column's raw inputs, sum the shifted values over the tree, add back
    the shift mass.

    Uniform slots: shifts 0..n-1, the scale n, tree node k at n+k-1, the
    closing addition at 2n.
    """
    if schedule is None:
        schedule = level_schedule(tree)
    n = tree.n
    X = np.asarray(X, dtype=np.float64)
    root_p = tree.node_precision(tree.root)
    if mode is RoundingMode.STOCHASTIC and uniforms is None:
        raise ValueError("stochastic rounding requires a uniform matrix")

    Xq = batch_quantize(tree, X)
    mid = (X.min(axis=0) + X.max(axis=0)) / 2.0
    c = round_vector(mid, root_p, RoundingMode.NEAREST_TIES_EVEN)

    t_bits = _leaf_parent_precision(tree)
    z = Xq - c
    y_hat = np.empty_like(z)
    for t in np.unique(t_bits):
        rows = t_bits == t
        u = uniforms[: n][rows] if mode is RoundingMode.STOCHASTIC else None
        y_hat[rows] = round_vector(z[rows], Precision(int(t)), mode, u)
    y_hi, y_lo = _two_sum(Xq, -c)

    zn = float(n) * c
    u = uniforms[n] if mode is RoundingMode.STOCHASTIC else None
    mass_hat = round_vector(zn, root_p, mode, u)
    mass_hi, mass_lo = two_prod(float(n), c)

    V, H, L = _scan_tree(schedule, y_hat, y_hi, y_lo, mode, uniforms, slot_base=n + 1)
    t_mat = np.zeros((n + 1, X.shape[1]))
    t_mat[2:] = H[2 : n + 1] + L[2 : n + 1]

    zf = V[n] + mass_hat
    u = uniforms[2 * n] if mode is RoundingMode.STOCHASTIC else None
    final = round_vector(zf, root_p, mode, u)

    # exact sum of x equals the exact shifted total plus the exact mass
    s_hi, e = _two_sum(H[n], mass_hi)
    e = e + (L[n] + mass_lo)
    s_hi, s_lo = _two_sum(s_hi, e)
    d, e = _two_sum(final, -s_hi)
    ehi, elo = _two_sum(d, e - s_lo)

    y = np.zeros((n + 2, X.shape[1]))
    y[1 : n + 1] = y_hi + y_lo
    y[n + 1] = mass_hi
    return BatchShiftedResult(
        xq=Xq, c=c, y=y, t=t_mat, computed=final, s_hi=s_hi, s_lo=s_lo,
        error=ehi + elo, inner_height=schedule.height,
    )


def batch_shifted_bounds(
    res: BatchShiftedResult, u: float, mode: RoundingMode, budget: ProbBudget = ProbBudget()
) -> dict[str, np.ndarray]:
    """Per-trial shifted bounds; the tree height gains two levels for the
    shift subtractions and the closing addition."""
    n = res.xq.shape[0]
    u_eff = mode.bound_factor * u
    h = res.inner_height + 2
    lam = _lam(n, budget.eta)
    one_phi = 1.0 + _phi(lam, h * u_eff * u_eff)
    first = budget.first_order_factor
    s_n = res.s_hi + res.s_lo
    quad = s_n**2 + np.sum(res.t[2:] ** 2, axis=0) + np.sum(res.y[1:] ** 2, axis=0)
    partial = u_eff * first * one_phi * np.sqrt(quad)
    dup = np.sum(np.abs(res.y[1 : n + 1]) + np.abs(res.xq), axis=0)
    inputs = u_eff * first * one_phi * (n * np.abs(res.c) + math.sqrt(h) * dup)
    return {"SHIFT_PARTIAL": partial, "SHIFT_INPUTS": inputs}


@dataclass
class BatchCompensatedResult:
    """Per-trial outcomes and bounds of a compensated-summation batch."""

    computed: np.ndarray
    s_hi: np.ndarray
    s_lo: np.ndarray
    error: np.ndarray
    bounds: dict[str, np.ndarray]

    def rel_error(self) -> np.ndarray:
        return np.abs(self.error) / np.abs(self.s_hi + self.s_lo)


def batch_compensated(
    X: np.ndarray,
    p: Precision,
    mode: RoundingMode,
    uniforms: np.ndarray | None = None,
    budget: ProbBudget = ProbBudget(),
) -> BatchCompensatedResult:
    """Compensated sequential summation per column, bounds fused in.

    Step k performs the y/s/z/c operations with uniform slots
    4(k-2)..4(k-2)+3.  The bound recurrences ride along in the same
    sweep, so no per-step matrix is ever materialized.
    """
    X = np.asarray(X, dtype=np.float64)
    n, chunk = X.shape
    if n < 2:
        raise ValueError("need at least two summands")
    if mode is RoundingMode.STOCHASTIC and uniforms is None:
        raise ValueError("stochastic rounding requires a uniform matrix")
    Xq = round_vector(X, p, RoundingMode.NEAREST_TIES_EVEN)

    u_eff = mode.bound_factor * p.u
    lam = _lam(n, budget.eta)
    first = budget.first_order_factor

    def rnd(z, slot):
        u = uniforms[slot] if mode is RoundingMode.STOCHASTIC else None
        return round_vector(z, p, mode, u)

    s_hat = Xq[0].copy()
    c_hat = np.zeros(chunk)
    hi, lo = Xq[0].copy(), np.zeros(chunk)

    sum_abs_x = np.abs(Xq[0])          # sum |x_k|, all k
    sum_abs_x_tail = np.zeros(chunk)   # sum_{k>=2} |x_k|
    sum_sq_x_tail = np.zeros(chunk)    # sum_{k>=2} x_k^2
    sum_abs_s_mid = np.zeros(chunk)    # sum_{2<=k<=n-1} |s_k|
    sum_sq_s = np.zeros(chunk)         # sum_{k>=2} s_k^2
    abs_s_n = np.zeros(chunk)
    abs_x_prev = np.zeros(chunk)

    z_b = np.zeros(chunk)
    c_b = np.zeros(chunk)
    s_b = np.zeros(chunk)
    g = np.zeros(chunk)

    for k in range(2, n + 1):
        xk = Xq[k - 1]
        base = 4 * (k - 2)
        yk = rnd(xk - c_hat, base)
        sk = rnd(s_hat + yk, base + 1)
        zk = rnd(sk - s_hat, base + 2)
        c_hat = rnd(zk - yk, base + 3)
        s_hat = sk

        hi, e = _two_sum(hi, xk)
        hi, lo = _two_sum(hi, e + lo)
        s_exact = np.abs(hi + lo)

        abs_xk = np.abs(xk)
        sum_abs_x += abs_xk
        sum_abs_x_tail += abs_xk
        sum_sq_x_tail += xk * xk
        sum_sq_s += s_exact * s_exact
        if k < n:
            sum_abs_s_mid += s_exact

        if k == 2:
            z_b = u_eff * s_exact
            c_b = u_eff * (abs_xk + z_b) + u_eff * s_exact
        else:
            y_b = c_b * (1.0 + u_eff)
            g = g + (abs_xk + y_b) ** 2 + c_b**2 + (abs_x_prev + z_b) ** 2
            s_b = lam * u_eff * np.sqrt(g)
            z_b = u_eff * (s_exact + s_b) + u_eff * (abs_xk + y_b) + y_b
            c_b = u_eff * (abs_xk + z_b) + u_eff * (s_exact + s_b)
        abs_x_prev = abs_xk
        abs_s_n = s_exact

    det_partial = (
        u_eff * abs_s_n
        + 2.0 * u_eff * (1.0 + 3.0 * u_eff) * sum_abs_x_tail
        + 4.0 * u_eff * u_eff * sum_abs_s_mid
    )
    det_inputs = (3.0 * u_eff + (4.0 * n - 2.0) * u_eff * u_eff) * sum_abs_x
    rec = u_eff * first * np.sqrt((abs_s_n + s_b) ** 2 + g)
    alpha = _alpha(u_eff)
    gamma = _gamma(n, budget.eta, u_eff)
    partial = u_eff * first * (
        abs_s_n
        + gamma * (math.sqrt(2.0) + alpha * u_eff) * np.sqrt(sum_sq_x_tail)
        + gamma * alpha * u_eff * np.sqrt(sum_sq_s)
    )
    inputs = (
        u_eff * first
        * (1.0 + math.sqrt(2.0) + math.sqrt(6.0) * (math.sqrt(n) + 1.0) * u_eff)
        * sum_abs_x
    )

    d, e = _two_sum(s_hat, -hi)
    ehi, elo = _two_sum(d, e - lo)
    return BatchCompensatedResult(
        computed=s_hat,
        s_hi=hi,
        s_lo=lo,
        error=ehi + elo,
        bounds={
            "COMP_DET_PARTIAL": det_partial,
            "COMP_DET_INPUTS": det_inputs,
            "COMP_PROB_REC": rec,
            "COMP_PROB_PARTIAL": partial,
            "COMP_PROB_INPUTS": inputs,
        },
    )
