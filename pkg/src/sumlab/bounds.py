"""Deterministic and probabilistic error bounds for emulated summation.

Every bound is a function of exact quantities (inputs, partial sums,
tree shape, unit roundoff, failure probabilities), never of the computed
values, so a bound can be evaluated once per configuration and compared
against any number of trials.  Probabilistic bounds hold with
probability at least 1 - (delta + eta): delta controls the first-order
concentration of the error martingale and eta the simultaneous
child-error bounds that feed it.

Bound identifiers name the algorithm, the flavour (deterministic or
probabilistic) and the quantities the bound is expressed in (partial
sums or inputs).  All of them scale linearly in u, so evaluation under
stochastic rounding just substitutes a doubled u.

A note on the closed-form correction factor phi: the mixed-precision
variant is evaluated as lambda * sqrt(2 * wh) * exp(lambda^2 * wh),
where wh is the weighted height (the maximum over vertices of the sum
of u_j^2 over ancestors).  Writing it with a stand-alone factor u of
some single precision would be dimensionally inconsistent in a tree
that has no single precision, and would not collapse to the
mono-precision factor under wh = h * u^2; the mono-precision phi is
this same expression with wh = h * u^2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .trees import CompTree, is_leaf_ref, tree_stats

__all__ = [
    "BOUND_IDS",
    "ProbBudget",
    "Constants",
    "constants",
    "det_bounds",
    "f_table",
    "prob_bounds_general",
    "shifted_bounds",
    "compensated_bounds",
    "mixed_bounds",
]

BOUND_IDS = (
    "DET_PARTIAL",
    "DET_INPUTS",
    "PROB_REC",
    "PROB_CLOSED_PARTIAL",
    "PROB_CLOSED_INPUTS",
    "SHIFT_PARTIAL",
    "SHIFT_INPUTS",
    "COMP_DET_PARTIAL",
    "COMP_DET_INPUTS",
    "COMP_PROB_REC",
    "COMP_PROB_PARTIAL",
    "COMP_PROB_INPUTS",
    "MIX_REC",
    "MIX_CLOSED_PARTIAL",
    "MIX_CLOSED_INPUTS",
    "FABSUM_INPUTS",
    "FABSUM_DET_FIRSTORDER",
)


@dataclass(frozen=True)
class ProbBudget:
    """Failure probabilities of a probabilistic bound.

    ``delta`` is spent on the first-order martingale concentration,
    ``eta`` on holding all child-error bounds simultaneously.  The
    bound then fails with probability at most delta + eta.
    """

    delta: float = 1e-2
    eta: float = 1e-3

    def __post_init__(self) -> None:
        if not (0.0 < self.delta < 1.0 and 0.0 < self.eta < 1.0):
            raise ValueError("failure probabilities must lie in (0, 1)")
        if self.delta + self.eta >= 1.0:
            raise ValueError("delta + eta must stay below 1")

    @property
    def first_order_factor(self) -> float:
        """sqrt(2 ln(2/delta)), the Azuma-Hoeffding amplification."""
        return math.sqrt(2.0 * math.log(2.0 / self.delta))


def _lam(m: float, eta: float) -> float:
    # sqrt(2 ln(2m/eta)): amplification for m simultaneous child bounds
    if m <= 0 or 2.0 * m <= eta:
        raise ValueError("lambda requires 2m > eta > 0")
    return math.sqrt(2.0 * math.log(2.0 * m / eta))


def _phi(lam: float, weighted_height: float) -> float:
    # higher-order correction; mono precision passes weighted_height = h*u^2
    return lam * math.sqrt(2.0 * weighted_height) * math.exp(lam * lam * weighted_height)


@dataclass(frozen=True)
class Constants:
    """The scalar constants entering the bounds, for inspection.

    ``lambda_n``/``lambda_n_tilde`` amplify n (all nodes) or n_tilde
    (nodes with an internal child) simultaneous child-error bounds;
    ``phi_n``/``phi_n_tilde`` are the matching higher-order correction
    factors for a tree of height h.  ``alpha`` and ``gamma`` appear in
    the compensated partial-sum bound; ``beta_aux`` = u(1+u)^2 is the
    contraction rate of the compensated correction terms.
    """

    u: float
    n: int
    n_tilde: int
    h: int
    lambda_h: float
    sqrt_2ln2_delta: float
    lambda_n: float
    lambda_n_tilde: float
    phi_n: float
    phi_n_tilde: float
    alpha: float
    gamma: float
    beta_aux: float


def _alpha(u: float) -> float:
    one = 1.0 + u
    num = math.sqrt(1.0 + 3.0 * one**2 + 2.0 * one**4)
    den = 1.0 - u * one**2
    if den <= 0.0:
        raise ValueError("u too large for the compensated constant")
    return num / den


def _gamma(n: int, eta: float, u: float) -> float:
    lam = _lam(n, eta)
    alpha = _alpha(u)
    grow = lam * alpha * math.sqrt(2.0 * n) * u * u * math.exp((lam * alpha) ** 2 * n * u**4)
    return math.sqrt(1.0 + (lam * u) ** 2) * (1.0 + grow)


def constants(n: int, n_tilde: int, h: int, u: float, budget: ProbBudget = ProbBudget()) -> Constants:
    """Evaluate every scalar constant for a tree of the given shape."""
    if n < 2:
        raise ValueError("need at least two summands")
    wh = h * u * u
    return Constants(
        u=u,
        n=n,
        n_tilde=n_tilde,
        h=h,
        lambda_h=(1.0 + u) ** h,
        sqrt_2ln2_delta=budget.first_order_factor,
        lambda_n=_lam(n, budget.eta),
        lambda_n_tilde=_lam(n_tilde, budget.eta),
        phi_n=_phi(_lam(n, budget.eta), wh),
        phi_n_tilde=_phi(_lam(n_tilde, budget.eta), wh),
        alpha=_alpha(u),
        gamma=_gamma(n, budget.eta, u),
        beta_aux=u * (1.0 + u) ** 2,
    )


def _finalize(report: dict[str, float]) -> dict[str, float]:
    for key, value in report.items():
        if not (value >= 0.0 and math.isfinite(value)):
            raise ValueError(f"{key} evaluated to {value!r}")
        report[key] = float(value)
    return report


def _mono_u(tree: CompTree) -> None:
    if not tree.is_mono_precision():
        raise ValueError("tree mixes precisions; use mixed_bounds")


def det_bounds(tree: CompTree, s: np.ndarray, x: np.ndarray, u: float) -> dict[str, float]:
    """Worst-case bounds: (1+u)^h * u * sum|s_k|, and the weaker form
    that replaces each partial sum by a height-scaled input sum."""
    _mono_u(tree)
    h = tree_stats(tree).height
    lambda_h = (1.0 + u) ** h
    partial = lambda_h * u * float(np.sum(np.abs(s[2:])))
    inputs = lambda_h * h * u * float(np.sum(np.abs(x)))
    return _finalize({"DET_PARTIAL": partial, "DET_INPUTS": inputs})


def _f_scan(tree: CompTree, s: np.ndarray, lam: float, w: np.ndarray) -> tuple[np.ndarray, float]:
    """Child-error bound recurrence over the tree.

    F_k = lam * sqrt(sum over internal descendants j of w_j(|s_j|+F_j)^2),
    evaluated in one topological pass by carrying the inner sum G_k:
    each node folds its internal children's (|s|+F)^2 terms and their
    G's, so the quadratic double sum costs O(n) total.

    Returns the F array and the whole-tree sum including the root term,
    which is what the recurrence-form bounds need.
    """
    n = tree.n
    F = np.zeros(n + 1)
    G = np.zeros(n + 1)
    for k in tree.internal_nodes:
        g = 0.0
        for ref in tree.children(k):
            if not is_leaf_ref(ref):
                g += w[ref] * (abs(float(s[ref])) + F[ref]) ** 2 + G[ref]
        G[k] = g
        if g != 0.0:
            F[k] = lam * math.sqrt(g)
    total = G[n] + w[n] * (abs(float(s[n])) + F[n]) ** 2
    return F, total


def f_table(
    tree: CompTree,
    s: np.ndarray,
    u: float,
    budget: ProbBudget = ProbBudget(),
    variant: str = "n",
) -> np.ndarray:
    """Per-node child-error bounds F_k for a mono-precision tree.

    ``variant`` selects the count m in lambda = sqrt(2 ln(2m/eta)):
    "n" uses the number of summands (valid for every tree); "n_tilde"
    uses only the nodes with an internal child, which is sharper.
    F_k = 0 at nodes whose children are both leaves.
    """
    _mono_u(tree)
    stats = tree_stats(tree)
    if variant == "n":
        m = tree.n
    elif variant == "n_tilde":
        m = stats.n_reduced
    else:
        raise ValueError(f"unknown variant {variant!r}")
    if m == 0:
        # every node is a leaf pair, so every child error vanishes
        return np.zeros(tree.n + 1)
    w = np.full(tree.n + 1, u * u)
    F, _ = _f_scan(tree, s, _lam(m, budget.eta), w)
    return F


def prob_bounds_general(
    tree: CompTree,
    s: np.ndarray,
    x: np.ndarray,
    u: float,
    budget: ProbBudget = ProbBudget(),
) -> dict[str, float]:
    """Probabilistic bounds for a plain tree summation.

    The recurrence form keeps each node's partial sum inflated by its
    child-error bound; the closed forms trade that for the single
    correction factor 1 + phi and, in the weakest version, for the
    height-scaled input sum.
    """
    _mono_u(tree)
    n = tree.n
    stats = tree_stats(tree)
    lam = _lam(n, budget.eta)
    w = np.full(n + 1, u * u)
    _, total = _f_scan(tree, s, lam, w)
    first = budget.first_order_factor
    rec = first * math.sqrt(total)
    one_phi = 1.0 + _phi(lam, stats.height * u * u)
    partial = u * first * one_phi * math.sqrt(float(np.sum(np.square(s[2:]))))
    inputs = u * math.sqrt(stats.height) * first * one_phi * float(np.sum(np.abs(x)))
    return _finalize(
        {"PROB_REC": rec, "PROB_CLOSED_PARTIAL": partial, "PROB_CLOSED_INPUTS": inputs}
    )


def shifted_bounds(
    y: np.ndarray,
    t: np.ndarray,
    s_n: float,
    c: float,
    h: int,
    u: float,
    budget: ProbBudget = ProbBudget(),
) -> dict[str, float]:
    """Probabilistic bounds for shifted summation.

    ``y`` holds the exact shifted values indexed 1..n+1 (y_k = x_k - c,
    y_{n+1} = n*c), ``t`` the exact partial sums of the inner tree on
    the shifted values indexed 2..n, and ``h`` the height of the full
    computational tree (two more than the inner tree's).  The input
    form reconstructs x_k = y_k + c, which is exact.
    """
    n = len(y) - 2
    if n < 2:
        raise ValueError("need at least two summands")
    if len(t) != n + 1:
        raise ValueError("partial-sum array must be indexed 2..n")
    lam = _lam(n, budget.eta)
    one_phi = 1.0 + _phi(lam, h * u * u)
    first = budget.first_order_factor
    quad = s_n * s_n + float(np.sum(np.square(t[2:]))) + float(np.sum(np.square(y[1:])))
    partial = u * first * one_phi * math.sqrt(quad)
    shifted = np.abs(y[1 : n + 1])
    originals = np.abs(y[1 : n + 1] + c)
    inputs = u * first * one_phi * (n * abs(c) + math.sqrt(h) * float(np.sum(shifted + originals)))
    return _finalize({"SHIFT_PARTIAL": partial, "SHIFT_INPUTS": inputs})


def compensated_bounds(
    x: np.ndarray,
    s: np.ndarray,
    u: float,
    budget: ProbBudget = ProbBudget(),
) -> dict[str, float]:
    """Bounds for compensated sequential summation.

    ``x`` holds the n summands; ``s`` the exact partial sums indexed by
    step, entries 0 and 1 unused.  The deterministic pair comes from
    the second-order error expansion (they omit the third-order
    remainder).  The probabilistic recurrence form carries per-step
    bounds Y, S, Z, C on the four child errors; the closed forms absorb
    the recurrences into the constants alpha and gamma.
    """
    x = np.asarray(x, dtype=np.float64)
    n = len(x)
    if n < 2:
        raise ValueError("need at least two summands")
    abs_x = np.abs(x)
    abs_s = np.abs(s)
    sum_x = float(np.sum(abs_x))
    det_partial = (
        u * abs_s[n]
        + 2.0 * u * (1.0 + 3.0 * u) * float(np.sum(abs_x[1:]))
        + 4.0 * u * u * float(np.sum(abs_s[2:n]))
    )
    det_inputs = (3.0 * u + (4.0 * n - 2.0) * u * u) * sum_x

    # per-step child-error bounds; the sum inside S_k grows by one
    # triple of squares per step, so the scan is linear
    lam = _lam(n, budget.eta)
    z_prev = u * abs_s[2]
    c_prev = u * (abs_x[1] + z_prev) + u * abs_s[2]
    s_bound = 0.0
    g = 0.0
    for k in range(3, n + 1):
        y_k = c_prev * (1.0 + u)
        g += (abs_x[k - 1] + y_k) ** 2 + c_prev**2 + (abs_x[k - 2] + z_prev) ** 2
        s_bound = lam * u * math.sqrt(g)
        z_prev = u * (abs_s[k] + s_bound) + u * (abs_x[k - 1] + y_k) + y_k
        c_prev = u * (abs_x[k - 1] + z_prev) + u * (abs_s[k] + s_bound)
    first = budget.first_order_factor
    rec = u * first * math.sqrt((abs_s[n] + s_bound) ** 2 + g)

    alpha = _alpha(u)
    gamma = _gamma(n, budget.eta, u)
    x_norm = math.sqrt(float(np.sum(np.square(x[1:]))))
    s_norm = math.sqrt(float(np.sum(np.square(s[2:]))))
    partial = u * first * (
        abs_s[n] + gamma * (math.sqrt(2.0) + alpha * u) * x_norm + gamma * alpha * u * s_norm
    )
    inputs = u * first * (1.0 + math.sqrt(2.0) + math.sqrt(6.0) * (math.sqrt(n) + 1.0) * u) * sum_x
    return _finalize(
        {
            "COMP_DET_PARTIAL": det_partial,
            "COMP_DET_INPUTS": det_inputs,
            "COMP_PROB_REC": rec,
            "COMP_PROB_PARTIAL": partial,
            "COMP_PROB_INPUTS": inputs,
        }
    )


def mixed_bounds(
    tree: CompTree,
    s: np.ndarray,
    x: np.ndarray,
    budget: ProbBudget = ProbBudget(),
    u_scale: float = 1.0,
    fabsum: tuple[int, float, float] | None = None,
) -> dict[str, float]:
    """Bounds for a tree whose nodes round at different precisions.

    Each node contributes its own roundoff bound u_k = u_scale * 2^-t_k
    (u_scale = 2 evaluates the stochastic-rounding bounds).  On a
    mono-precision tree these reduce exactly to prob_bounds_general.

    ``fabsum = (b, u_lo, u_hi)`` additionally evaluates the blocked
    two-stage bounds: the input-sum form on the conventional weighted
    height b*u_lo^2 + ceil(n/b)*u_hi^2, and the first-order b*u_lo
    input bound.  Both u_lo and u_hi are scaled by u_scale.
    """
    n = tree.n
    stats = tree_stats(tree)
    lam = _lam(n, budget.eta)
    first = budget.first_order_factor
    u_node = u_scale * np.ldexp(1.0, -tree.precision_t.astype(np.int64))
    w = np.square(u_node)
    _, total = _f_scan(tree, s, lam, w)
    rec = first * math.sqrt(total)

    wh = stats.weighted_height * u_scale * u_scale
    one_phi = 1.0 + _phi(lam, wh)
    partial = first * one_phi * math.sqrt(float(np.sum(w[2:] * np.square(s[2:]))))
    sum_x = float(np.sum(np.abs(x)))
    inputs = math.sqrt(wh) * first * one_phi * sum_x
    report = {"MIX_REC": rec, "MIX_CLOSED_PARTIAL": partial, "MIX_CLOSED_INPUTS": inputs}

    if fabsum is not None:
        b, u_lo, u_hi = fabsum
        u_lo = u_scale * u_lo
        u_hi = u_scale * u_hi
        blocks = -(-n // b)
        wh_conv = b * u_lo * u_lo + blocks * u_hi * u_hi
        report["FABSUM_INPUTS"] = (
            math.sqrt(wh_conv) * first * (1.0 + _phi(lam, wh_conv)) * sum_x
        )
        report["FABSUM_DET_FIRSTORDER"] = b * u_lo * sum_x
    return _finalize(report)
