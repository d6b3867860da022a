"""Exact error identities, verified against traced runs.

The forward error of any traced summation satisfies algebraic
identities in the recorded roundoffs and the exact partial sums.  These
identities hold exactly in real arithmetic, so they double as oracles:
any disagreement beyond evaluation noise is a bug in a kernel, a
rounding routine, or the identity evaluation itself.  All sums and
products here are carried in double-double so that the comparison
tolerance is limited by the identities, not by the oracle's own
arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernels import CompensatedTrace, TracedRun
from .refsum import (
    dd_add,
    dd_add_d,
    dd_mul,
    dd_mul_d,
    dd_sub,
    dd_sub_d_dd,
    dd_sum,
    dd_to_float,
    two_sum,
)
from .rounding import Precision, RoundingMode
from .trees import CompTree, is_leaf_ref

__all__ = [
    "ChildErrorTable",
    "error_via_local_products",
    "error_via_child_recurrence",
    "first_order_error",
    "compensated_child_errors",
    "compensated_second_order",
    "check_rho_bound",
    "replay_tree_sum",
    "replay_compensated",
]

DD = tuple[float, float]


@dataclass
class ChildErrorTable:
    """Per-node child-errors f_k; for compensated runs also the dotted
    forward errors and double-dotted child-errors of the four update
    lines (arrays indexed by step, entries below 2 unused)."""

    f: np.ndarray | None = None
    y_dot: np.ndarray | None = None
    s_dot: np.ndarray | None = None
    z_dot: np.ndarray | None = None
    c_dot: np.ndarray | None = None
    y_ddot: np.ndarray | None = None
    s_ddot: np.ndarray | None = None
    z_ddot: np.ndarray | None = None
    c_ddot: np.ndarray | None = None


def _tree_and_deltas(run: TracedRun, tree: CompTree | None) -> tuple[CompTree, np.ndarray]:
    if tree is None:
        tree = run.tree
    if tree is None or run.tree is not tree:
        raise ValueError("run was not produced on this tree")
    if run.algorithm not in ("tree", "fabsum"):
        raise ValueError(f"tree-sum identities do not apply to a {run.algorithm!r} run")
    delta = np.zeros(tree.n + 1)
    count = 0
    for rec in run.trace:
        if rec.role == "sum":
            delta[rec.op_id] = rec.delta
            count += 1
    if count != tree.n - 1:
        raise ValueError("trace does not hold one sum record per internal node")
    return tree, delta


def error_via_local_products(run: TracedRun, tree: CompTree | None = None) -> float:
    """e_n as the sum over nodes of the local error amplified along the
    path to the root: e_n = sum_k s_k delta_k prod_{k < j <= n} (1 + delta_j)."""
    tree, delta = _tree_and_deltas(run, tree)
    n = tree.n
    # path products, root downward: A_child = A_parent * (1 + delta_parent)
    a_hi = np.zeros(n + 1)
    a_lo = np.zeros(n + 1)
    a_hi[n] = 1.0
    for k in range(n, 1, -1):
        a_k = (float(a_hi[k]), float(a_lo[k]))
        grown = dd_add(a_k, dd_mul_d(a_k, float(delta[k])))
        for ref in tree.children(k):
            if not is_leaf_ref(ref):
                a_hi[ref], a_lo[ref] = grown
    total: DD = (0.0, 0.0)
    for k in range(2, n + 1):
        s_k = (float(run.exact_hi[k]), float(run.exact_lo[k]))
        term = dd_mul(dd_mul_d(s_k, float(delta[k])), (float(a_hi[k]), float(a_lo[k])))
        total = dd_add(total, term)
    return dd_to_float(total)


def error_via_child_recurrence(
    run: TracedRun, tree: CompTree | None = None
) -> tuple[float, ChildErrorTable]:
    """e_n via the child-error recurrence f_k = sum of child node errors,
    e_k = f_k + (s_k + f_k) delta_k; f_k vanishes at leaf-pair nodes."""
    tree, delta = _tree_and_deltas(run, tree)
    n = tree.n
    f_hi = np.zeros(n + 1)
    f_lo = np.zeros(n + 1)
    e_hi = np.zeros(n + 1)
    e_lo = np.zeros(n + 1)
    for k in range(2, n + 1):
        f_k: DD = (0.0, 0.0)
        for ref in tree.children(k):
            if not is_leaf_ref(ref):
                f_k = dd_add(f_k, (float(e_hi[ref]), float(e_lo[ref])))
        s_k = (float(run.exact_hi[k]), float(run.exact_lo[k]))
        e_k = dd_add(f_k, dd_mul_d(dd_add(s_k, f_k), float(delta[k])))
        f_hi[k], f_lo[k] = f_k
        e_hi[k], e_lo[k] = e_k
    table = ChildErrorTable(f=f_hi + f_lo)
    return float(e_hi[n] + e_lo[n]), table


def first_order_error(run: TracedRun, tree: CompTree | None = None) -> float:
    """The first-order estimate sum_k s_k delta_k; e_n minus this is O(u^2)."""
    tree, delta = _tree_and_deltas(run, tree)
    total: DD = (0.0, 0.0)
    for k in range(2, tree.n + 1):
        s_k = (float(run.exact_hi[k]), float(run.exact_lo[k]))
        total = dd_add(total, dd_mul_d(s_k, float(delta[k])))
    return dd_to_float(total)


def _dd_neg(a: DD) -> DD:
    return (-a[0], -a[1])


def compensated_child_errors(
    ct: CompensatedTrace,
    x: np.ndarray,
    s: np.ndarray,
    s_lo: np.ndarray | None = None,
    tol: float = 1e-10,
) -> ChildErrorTable:
    """Cross-check the compensated error recurrences against definitions.

    Builds the dotted forward errors from the machine values (their
    definitions, e.g. s-dot_k = shat_k - s_k) and the double-dotted
    child-errors twice: once definitionally (e.g. z-ddot_k = s-dot_k -
    s-dot_{k-1}) and once from the theorem recurrences driven purely by
    the roundoffs and exact values.  Raises if any pair disagrees beyond
    tol, which would mean the kernel and the error theory disagree.

    x must be the exactly representable inputs of the run; s the exact
    prefix sums (s_lo carries their low-order double-double parts).
    """
    x = np.asarray(x, dtype=np.float64)
    n = len(x)
    if n < 2:
        raise ValueError("need at least two summands")
    if s_lo is None:
        s_lo = np.zeros(n + 1)
    if len(s) != n + 1 or len(s_lo) != n + 1:
        raise ValueError("partial sums must be indexed 1..n")
    if float(ct.eta[2]) != 0.0:
        # the first correction subtracts an exact zero, so no trace of the
        # algorithm can carry a roundoff there; the recurrences rely on it
        raise ValueError("eta_2 must vanish in a compensated trace")

    def s_dd(k: int) -> DD:
        return (float(s[k]), float(s_lo[k]))

    # dotted forward errors straight from their definitions
    y_dot = [(0.0, 0.0)] * (n + 1)
    s_dot = [(0.0, 0.0)] * (n + 1)
    z_dot = [(0.0, 0.0)] * (n + 1)
    c_dot = [(0.0, 0.0)] * (n + 1)
    for k in range(2, n + 1):
        y_dot[k] = two_sum(float(ct.y_hat[k]), -float(x[k - 1]))
        s_dot[k] = dd_sub_d_dd(float(ct.s_hat[k]), s_dd(k))
        z_dot[k] = two_sum(float(ct.z_hat[k]), -float(x[k - 1]))
        c_dot[k] = (float(ct.c_hat[k]), 0.0)
    s_dot[1] = (0.0, 0.0)

    # double-dotted child-errors, definitional form
    y_dd_def = [(0.0, 0.0)] * (n + 1)
    s_dd_def = [(0.0, 0.0)] * (n + 1)
    z_dd_def = [(0.0, 0.0)] * (n + 1)
    c_dd_def = [(0.0, 0.0)] * (n + 1)
    for k in range(2, n + 1):
        y_dd_def[k] = _dd_neg(c_dot[k - 1]) if k > 2 else (0.0, 0.0)
        s_dd_def[k] = dd_add(s_dot[k - 1], y_dot[k])
        z_dd_def[k] = dd_sub(s_dot[k], s_dot[k - 1])
        c_dd_def[k] = dd_sub(z_dot[k], y_dot[k])

    # the same quantities from the theorem recurrences, driven by the
    # roundoffs alone; the s-ddot sum telescopes so it is accumulated
    y_dd_rec = [(0.0, 0.0)] * (n + 1)
    s_dd_rec = [(0.0, 0.0)] * (n + 1)
    z_dd_rec = [(0.0, 0.0)] * (n + 1)
    c_dd_rec = [(0.0, 0.0)] * (n + 1)
    z_dd_rec[2] = dd_mul_d(s_dd(2), float(ct.sigma[2]))
    c_dd_rec[2] = dd_add(
        dd_mul_d(dd_add_d(z_dd_rec[2], float(x[1])), float(ct.delta[2])),
        dd_mul_d(s_dd(2), float(ct.sigma[2])),
    )
    acc: DD = (0.0, 0.0)
    for k in range(3, n + 1):
        y_dd_rec[k] = _dd_neg(dd_add(c_dd_rec[k - 1], dd_mul_d(c_dd_rec[k - 1], float(ct.beta[k - 1]))))
        acc = dd_add(acc, dd_mul_d(dd_add_d(y_dd_rec[k], float(x[k - 1])), float(ct.eta[k])))
        acc = dd_sub(acc, dd_mul_d(c_dd_rec[k - 1], float(ct.beta[k - 1])))
        acc = dd_sub(acc, dd_mul_d(dd_add_d(z_dd_rec[k - 1], float(x[k - 2])), float(ct.delta[k - 1])))
        s_dd_rec[k] = acc
        s_plus = dd_add(s_dd(k), s_dd_rec[k])
        y_term = dd_mul_d(dd_add_d(y_dd_rec[k], float(x[k - 1])), float(ct.eta[k]))
        z_dd_rec[k] = dd_add(dd_add(dd_mul_d(s_plus, float(ct.sigma[k])), y_term), y_dd_rec[k])
        c_dd_rec[k] = dd_add(
            dd_mul_d(dd_add_d(z_dd_rec[k], float(x[k - 1])), float(ct.delta[k])),
            dd_mul_d(s_plus, float(ct.sigma[k])),
        )

    # recorded roundoffs carry 2^-53 relative noise, so two exactly equal
    # quantities can differ by ~2^-53 * u * (value scale); the absolute
    # floor tracks the largest roundoff in this trace
    scale = 1.0 + float(np.max(np.abs(s[1:]))) + float(np.max(np.abs(x)))
    u_eff = max(
        float(np.max(np.abs(a[2:]))) for a in (ct.eta, ct.sigma, ct.delta, ct.beta)
    )
    floor = 2.0**-48 * u_eff * scale

    def check(name: str, defs, recs) -> None:
        for k in range(2, n + 1):
            d = dd_to_float(defs[k])
            r = dd_to_float(recs[k])
            if abs(d - r) > max(tol * max(abs(d), abs(r)), floor):
                raise ValueError(
                    f"{name}[{k}] recurrence {r!r} disagrees with definition {d!r}"
                )

    check("y-ddot", y_dd_def, y_dd_rec)
    check("s-ddot", s_dd_def, s_dd_rec)
    check("z-ddot", z_dd_def, z_dd_rec)
    check("c-ddot", c_dd_def, c_dd_rec)

    def collapse(vals) -> np.ndarray:
        return np.array([dd_to_float(v) for v in vals])

    return ChildErrorTable(
        y_dot=collapse(y_dot),
        s_dot=collapse(s_dot),
        z_dot=collapse(z_dot),
        c_dot=collapse(c_dot),
        y_ddot=collapse(y_dd_def),
        s_ddot=collapse(s_dd_def),
        z_ddot=collapse(z_dd_def),
        c_ddot=collapse(c_dd_def),
    )


def compensated_second_order(ct: CompensatedTrace, x: np.ndarray, s: np.ndarray) -> float:
    """Second-order expansion of the compensated error; e_n minus this
    is O(u^3).

    Uses mu_k = eta_k - delta_k for 2 <= k <= n-1 and mu_n = eta_n.
    """
    x = np.asarray(x, dtype=np.float64)
    n = len(x)
    mu = np.zeros(n + 1)
    for k in range(2, n):
        mu[k] = ct.eta[k] - ct.delta[k]
    mu[n] = ct.eta[n]

    total = dd_mul_d((float(s[n]), 0.0), float(ct.sigma[n]))
    acc: DD = (0.0, 0.0)
    for k in range(2, n + 1):
        acc = dd_add(acc, dd_mul_d((float(x[k - 1]), 0.0), float(mu[k])))
    total = dd_add(total, dd_add(acc, dd_mul_d(acc, float(ct.sigma[n]))))
    for k in range(2, n):
        w = float(mu[k + 1] + ct.beta[k] + ct.delta[k])
        term = dd_mul_d(dd_mul_d((float(s[k]), 0.0), float(ct.sigma[k])), w)
        total = dd_sub(total, term)
        w2 = float(mu[k + 1] + ct.beta[k] + ct.eta[k])
        term2 = dd_mul_d(dd_mul_d((float(x[k - 1]), 0.0), float(ct.delta[k])), w2)
        total = dd_sub(total, term2)
    return dd_to_float(total)


def check_rho_bound(
    ct: CompensatedTrace,
    x: np.ndarray,
    p: Precision,
    mode: RoundingMode = RoundingMode.NEAREST_TIES_EVEN,
    slack: float = 16.0,
) -> bool:
    """Check the compensated per-term backward bound in aggregate.

    The per-term coefficients |rho_k| <= 3u + (4(n-k)+6)u^2 carry an
    unstated third-order remainder; `slack` is its assumed constant, as
    slack * u^3 * n per term.  Individual rho_k are not recoverable (the
    backward decomposition is not unique), so only the implied bound on
    |shat_n - s_n| is checked.
    """
    x = np.asarray(x, dtype=np.float64)
    n = len(x)
    u = p.u * mode.bound_factor
    e = dd_to_float(dd_sub_d_dd(float(ct.s_hat[n]), dd_sum(x)))
    rhs = 0.0
    for k in range(1, n + 1):
        coeff = 3 * u + (4 * (n - k) + 6) * u * u + slack * u**3 * n
        rhs += coeff * abs(float(x[k - 1]))
    return abs(e) <= rhs


def replay_tree_sum(tree: CompTree, x: np.ndarray, delta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Model run with prescribed roundoffs: each node computes
    (left + right) * (1 + delta_k) in double-double.

    Lets tests drive the identities with synthetic roundoff patterns
    (e.g. fixed directions scaled by u) free of rounding noise.
    """
    x = np.asarray(x, dtype=np.float64)
    n = tree.n
    hi = np.zeros(n + 1)
    lo = np.zeros(n + 1)

    def value(ref: int) -> DD:
        if is_leaf_ref(ref):
            return float(x[-ref - 1]), 0.0
        return float(hi[ref]), float(lo[ref])

    for k in tree.internal_nodes:
        l, r = tree.children(k)
        v = dd_add(value(l), value(r))
        hi[k], lo[k] = dd_add(v, dd_mul_d(v, float(delta[k])))
    return hi, lo


@dataclass
class ReplayedCompensated:
    """Double-double model values of a compensated run with prescribed
    roundoffs (hi/lo pairs, indexed by step)."""

    y_hi: np.ndarray
    y_lo: np.ndarray
    s_hi: np.ndarray
    s_lo: np.ndarray
    z_hi: np.ndarray
    z_lo: np.ndarray
    c_hi: np.ndarray
    c_lo: np.ndarray


def replay_compensated(
    x: np.ndarray, eta: np.ndarray, sigma: np.ndarray, delta: np.ndarray, beta: np.ndarray
) -> ReplayedCompensated:
    """Drive the four compensated update lines with prescribed roundoffs."""
    x = np.asarray(x, dtype=np.float64)
    n = len(x)
    out = ReplayedCompensated(*(np.zeros(n + 1) for _ in range(8)))
    s_prev: DD = (float(x[0]), 0.0)
    c_prev: DD = (0.0, 0.0)
    out.s_hi[1] = x[0]
    for k in range(2, n + 1):
        v = dd_sub((float(x[k - 1]), 0.0), c_prev)
        y = dd_add(v, dd_mul_d(v, float(eta[k])))
        v = dd_add(s_prev, y)
        s_k = dd_add(v, dd_mul_d(v, float(sigma[k])))
        v = dd_sub(s_k, s_prev)
        z = dd_add(v, dd_mul_d(v, float(delta[k])))
        v = dd_sub(z, y)
        c_k = dd_add(v, dd_mul_d(v, float(beta[k])))
        out.y_hi[k], out.y_lo[k] = y
        out.s_hi[k], out.s_lo[k] = s_k
        out.z_hi[k], out.z_lo[k] = z
        out.c_hi[k], out.c_lo[k] = c_k
        s_prev, c_prev = s_k, c_k
    return out
