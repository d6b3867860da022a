"""Self-checks tying the emulator, the oracles, and the bound engine
together.

Each check returns a CheckResult and is independently runnable; the
`verify` CLI subcommand runs the five core suites, and the acceptance
tests call the same functions with the same defaults.  All randomness
is seeded, so a failure reproduces exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .bounds import ProbBudget, _alpha, constants, mixed_bounds, prob_bounds_general
from .harness import ExperimentConfig, ExperimentRow, coverage_report, run_experiment
from .kernels import run_compensated, run_tree_sum
from .oracles import (
    compensated_child_errors,
    compensated_second_order,
    error_via_child_recurrence,
    error_via_local_products,
    first_order_error,
)
from .rounding import Precision, RoundingMode
from .trees import (
    build_pairwise,
    build_random_tree,
    build_sequential,
    exact_partial_sums,
)

__all__ = [
    "CheckResult",
    "check_error_identities",
    "check_compensated_recurrences",
    "check_constants",
    "check_alpha",
    "check_convergence_orders",
    "check_coverage",
    "check_reduction_consistency",
    "check_deterministic_domination",
    "trend_tree",
    "trend_shifted",
    "trend_compensated",
    "trend_fabsum_fullscale",
    "core_suites",
]

RTN = RoundingMode.NEAREST_TIES_EVEN
SR = RoundingMode.STOCHASTIC


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}: {self.name}: {self.detail}"


def _random_tree(kind: str, n: int, t: int, rng) -> object:
    p = Precision(t)
    if kind == "seq":
        return build_sequential(n, p)
    if kind == "pairwise":
        return build_pairwise(n, p)
    return build_random_tree(n, rng, p)


def check_error_identities(configs: int = 200, seed: int = 20260101) -> CheckResult:
    """Both exact error decompositions must reproduce the observed
    forward error on random trees, sizes, precisions, and modes."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for i in range(configs):
        kind = ("seq", "pairwise", "random")[i % 3]
        n = int(round(10.0 ** rng.uniform(1.0, 4.0)))
        t = int(rng.choice((8, 11, 24)))
        mode = (RTN, SR)[i % 2]
        tree = _random_tree(kind, n, t, rng)
        x = rng.uniform(0.0, 1.0, n)
        run = run_tree_sum(tree, x, mode, rng)
        e = run.error()
        # recorded roundoffs carry 2^-53 relative noise; scale its floor
        # by the trace's own magnitudes
        floor = 2.0**-48 * 2.0**-t * float(np.nansum(np.abs(run.exact_hi)))
        for oracle in (
            error_via_local_products(run),
            error_via_child_recurrence(run)[0],
        ):
            rel = abs(oracle - e) / max(abs(e), floor)
            worst = max(worst, rel)
        if worst > 1e-10:
            return CheckResult(
                "error identities",
                False,
                f"config {i} ({kind}, n={n}, t={t}, {mode.value}) off by {worst:.2e}",
            )
    return CheckResult(
        "error identities", True, f"{configs} configs, worst relative gap {worst:.2e}"
    )


def check_compensated_recurrences(runs: int = 100, seed: int = 20260202) -> CheckResult:
    """The four child-error recurrences must match their definitions,
    with the exact zero base cases."""
    rng = np.random.default_rng(seed)
    p = Precision(11)
    for i in range(runs):
        n = int(round(10.0 ** rng.uniform(0.5, 3.0)))
        n = max(n, 2)
        mode = (RTN, SR)[i % 2]
        x = rng.uniform(0.0, 1.0, n)
        run, ct = run_compensated(x, p, mode, rng)
        try:
            table = compensated_child_errors(ct, run.x, run.exact_hi, run.exact_lo)
        except ValueError as exc:
            return CheckResult(
                "compensated recurrences", False, f"run {i} (n={n}): {exc}"
            )
        if not (ct.eta[2] == 0.0 and table.y_ddot[2] == 0.0 and table.s_ddot[2] == 0.0):
            return CheckResult(
                "compensated recurrences", False, f"run {i} (n={n}): base case not exact"
            )
        if table.s_dot[n] != run.error():
            return CheckResult(
                "compensated recurrences",
                False,
                f"run {i} (n={n}): forward error mismatch",
            )
    return CheckResult(
        "compensated recurrences", True, f"{runs} runs, all recurrences within 1e-10"
    )


def check_constants(tol: float = 0.02) -> CheckResult:
    """Spot values of the bound constants at two regimes."""
    c1 = constants(10**5, 10**5, 10**5, 2.0**-11, ProbBudget(1e-2, 1e-3))
    c2 = constants(10**10, 10**10, 10**10, 2.0**-24, ProbBudget(1e-2, 1e-32))
    checks = [
        ("sqrt(2 ln(2/delta))", c1.sqrt_2ln2_delta, 3.26),
        ("lambda(1e5, 1e-3)", c1.lambda_n, 6.2),
        ("1+phi at n=h=1e5, t=11", 1.0 + c1.phi_n, 4.4),
        ("lambda(1e10, 1e-32)", c2.lambda_n, 14.0),
    ]
    for name, got, want in checks:
        if abs(got - want) > tol * want:
            return CheckResult(
                "constants spot-check", False, f"{name}: {got:.4f} vs {want}"
            )
    if not 1.0 + c2.phi_n < 1.12:
        return CheckResult(
            "constants spot-check", False, f"1+phi at 1e10: {1.0 + c2.phi_n:.4f} >= 1.12"
        )
    return CheckResult(
        "constants spot-check",
        True,
        f"3.26/6.2/4.4/14.0 within {tol:.0%}, 1+phi(1e10)={1.0 + c2.phi_n:.4f} < 1.12",
    )


def _alpha_sq_exact(u: Fraction) -> Fraction:
    num = 1 + 3 * (1 + u) ** 2 + 2 * (1 + u) ** 4
    return num / (1 - u * (1 + u) ** 2) ** 2


def check_alpha() -> CheckResult:
    """alpha(0) is exactly sqrt(6); the u^2 coefficient of alpha^2 is
    stable across precisions.

    The u^2 term sits ~17 decimal digits below the leading 6 at
    u = 2^-32, beyond double resolution, so the coefficient is taken
    from the exact rational form; the float implementation is pinned to
    it at the coarser precision.
    """
    if _alpha(0.0) != math.sqrt(6.0):
        return CheckResult("alpha expansion", False, f"alpha(0) = {_alpha(0.0)!r}")
    ratios = []
    for k in (24, 32):
        u = Fraction(1, 2**k)
        ratios.append(float((_alpha_sq_exact(u) - 6 - 26 * u) / u**2))
    lo, hi = sorted(ratios)
    if not (0.0 < lo and hi <= 2.0 * lo):
        return CheckResult(
            "alpha expansion", False, f"u^2 coefficients {ratios} differ beyond 2x"
        )
    drift = abs(_alpha(2.0**-24) ** 2 - float(_alpha_sq_exact(Fraction(1, 2**24))))
    if drift > 1e-12 * 6.0:
        return CheckResult(
            "alpha expansion", False, f"float alpha drifts {drift:.2e} from exact"
        )
    return CheckResult(
        "alpha expansion", True, f"alpha(0)=sqrt(6); u^2 coefficients {lo:.1f}, {hi:.1f}"
    )


def _fit_slope(xs, ys) -> float:
    return float(np.polyfit(np.log2(np.asarray(xs)), np.log2(np.asarray(ys)), 1)[0])


def check_convergence_orders(
    n: int = 100, draws: int = 25, seed: int = 20260303
) -> CheckResult:
    """Residual orders in u: removing the first-order error term leaves
    O(u^2) for plain summation, and removing the second-order expansion
    leaves O(u^3) for compensated summation."""
    rng = np.random.default_rng(seed)
    ts = (8, 11, 14)
    res_first = {t: [] for t in ts}
    res_second = {t: [] for t in ts}
    for _ in range(draws):
        x = rng.uniform(0.0, 1.0, n)
        for t in ts:
            p = Precision(t)
            run = run_tree_sum(build_sequential(n, p), x, RTN)
            res_first[t].append(abs(run.error() - first_order_error(run)))
            crun, ct = run_compensated(x, p, RTN)
            s = crun.exact_hi + crun.exact_lo
            res_second[t].append(abs(crun.error() - compensated_second_order(ct, crun.x, s)))
    us = [2.0**-t for t in ts]
    slope1 = _fit_slope(us, [np.median(res_first[t]) for t in ts])
    slope2 = _fit_slope(us, [np.median(res_second[t]) for t in ts])
    ok = abs(slope1 - 2.0) <= 0.3 and abs(slope2 - 3.0) <= 0.5
    return CheckResult(
        "convergence orders",
        ok,
        f"first-order residual slope {slope1:.2f} (want 2 +/- 0.3), "
        f"second-order residual slope {slope2:.2f} (want 3 +/- 0.5)",
    )


def check_coverage(
    trials: int = 1000, n: int = 10_000, t: int = 11, seed: int = 20260404
) -> CheckResult:
    """Stochastic-rounding exceedance fractions of the probabilistic
    bounds must respect the failure budget at scale."""
    entries = []
    for experiment in ("seq", "pairwise"):
        cfg = ExperimentConfig(
            experiment, (n,), t=t, modes=(SR,), trials=trials, seed=seed
        )
        rows = list(run_experiment(cfg))
        entries += coverage_report(rows, cfg.budget)
    gated = [e for e in entries if e.gated]
    watched = [
        e for e in gated if e.bound_id in ("PROB_CLOSED_PARTIAL", "PROB_REC")
    ]
    failed = [e for e in gated if not e.passed]
    if failed or len(watched) != 4:
        bad = ", ".join(f"{e.experiment}/{e.bound_id}={e.fraction:.4f}" for e in failed)
        return CheckResult("probabilistic coverage", False, bad or "missing entries")
    worst = max(e.fraction for e in watched)
    thr = watched[0].threshold
    return CheckResult(
        "probabilistic coverage",
        True,
        f"{trials} trials at n={n}: worst exceedance {worst:.4f} <= {thr:.4f}",
    )


def check_reduction_consistency(instances: int = 50, seed: int = 20260505) -> CheckResult:
    """On a mono-precision tree the weighted bounds must collapse to the
    general probabilistic ones."""
    rng = np.random.default_rng(seed)
    budget = ProbBudget()
    worst = 0.0
    for i in range(instances):
        kind = ("seq", "pairwise", "random")[i % 3]
        n = int(rng.integers(2, 300))
        t = int(rng.choice((8, 11, 24)))
        tree = _random_tree(kind, n, t, rng)
        x = rng.uniform(-1.0, 1.0, n)
        s = exact_partial_sums(tree, x)
        mix = mixed_bounds(tree, s, x, budget)
        ref = prob_bounds_general(tree, s, x, 2.0**-t, budget)
        for mk, pk in (
            ("MIX_REC", "PROB_REC"),
            ("MIX_CLOSED_PARTIAL", "PROB_CLOSED_PARTIAL"),
            ("MIX_CLOSED_INPUTS", "PROB_CLOSED_INPUTS"),
        ):
            denom = max(abs(ref[pk]), 1e-300)
            worst = max(worst, abs(mix[mk] - ref[pk]) / denom)
        if worst > 1e-12:
            return CheckResult(
                "reduction consistency",
                False,
                f"instance {i} ({kind}, n={n}, t={t}) off by {worst:.2e}",
            )
    return CheckResult(
        "reduction consistency", True, f"{instances} instances, worst gap {worst:.2e}"
    )


def check_deterministic_domination(rows: list[ExperimentRow]) -> CheckResult:
    """No emitted row may exceed the worst-case bounds."""
    seen = 0
    for row in rows:
        for key in ("DET_PARTIAL", "DET_INPUTS"):
            if key in row.bounds:
                seen += 1
                if row.rel_error > row.bounds[key]:
                    return CheckResult(
                        "deterministic domination",
                        False,
                        f"({row.experiment}, n={row.n}, {row.mode.value}, trial "
                        f"{row.trial}): {row.rel_error!r} > {key}={row.bounds[key]!r}",
                    )
    return CheckResult(
        "deterministic domination", True, f"0 exceedances over {seen} bound evaluations"
    )


def _medians(rows, experiment, mode):
    by_n: dict[int, list[float]] = {}
    for row in rows:
        if row.experiment == experiment and row.mode is mode:
            by_n.setdefault(row.n, []).append(row.rel_error)
    ns = sorted(by_n)
    return ns, [float(np.median(by_n[n])) for n in ns]


def trend_tree(rows: list[ExperimentRow]) -> CheckResult:
    """Stochastic rounding: sequential error grows like sqrt(n),
    pairwise stays nearly flat."""
    ns_s, med_s = _medians(rows, "seq", SR)
    ns_p, med_p = _medians(rows, "pairwise", SR)
    if len(ns_s) < 3 or len(ns_p) < 3:
        return CheckResult("tree error growth", False, "not enough grid points")
    slope_s = _fit_slope(ns_s, med_s)
    slope_p = _fit_slope(ns_p, med_p)
    contrast = med_s[-1] / med_p[-1]
    ok = 0.35 <= slope_s <= 0.65 and -0.1 <= slope_p <= 0.2 and contrast > 3.0
    return CheckResult(
        "tree error growth",
        ok,
        f"sequential slope {slope_s:.2f} (want ~0.5), pairwise slope {slope_p:.2f} "
        f"(want ~0), contrast at n={ns_s[-1]}: {contrast:.1f}x",
    )


def _median_cap(rows, experiments, cap, name) -> CheckResult:
    worst, where = 0.0, ""
    for experiment in experiments:
        for mode in (RTN, SR):
            ns, meds = _medians(rows, experiment, mode)
            if not ns:
                return CheckResult(name, False, f"no rows for {experiment}/{mode.value}")
            top = max(meds)
            if top > worst:
                worst, where = top, f"{experiment}/{mode.value} at n={ns[int(np.argmax(meds))]}"
    return CheckResult(
        name,
        worst <= cap,
        f"worst median {worst:.3e} ({where}), cap {cap:.3e}",
    )


def trend_shifted(rows: list[ExperimentRow], t: int = 11) -> CheckResult:
    """Shifting keeps the median relative error within a few roundoffs."""
    return _median_cap(
        rows, ("shifted-seq", "shifted-pairwise"), 10.0 * 2.0**-t, "shifted accuracy"
    )


def trend_compensated(rows: list[ExperimentRow], t: int = 11) -> CheckResult:
    """Compensation keeps the median relative error within a few
    roundoffs across the whole size grid."""
    return _median_cap(rows, ("compensated",), 10.0 * 2.0**-t, "compensated accuracy")


def trend_fabsum_fullscale(
    n: int = 1_000_000, trials: int = 25, seed: int = 20260606
) -> CheckResult:
    """Blocked two-precision summation under stochastic rounding stays
    below the fast precision's unit roundoff at large n."""
    cfg = ExperimentConfig(
        "fabsum", (n,), t=11, t_hi=24, block=32, modes=(SR,), trials=trials, seed=seed
    )
    rows = list(run_experiment(cfg))
    med = float(np.median([r.rel_error for r in rows]))
    u_lo = 2.0**-11
    return CheckResult(
        "blocked summation at full scale",
        med < u_lo,
        f"median {med:.3e} vs u_lo {u_lo:.3e} at n={n}",
    )


def core_suites(coverage_trials: int = 1000) -> list[CheckResult]:
    """The five suites behind the `verify` subcommand."""
    return [
        check_error_identities(),
        check_compensated_recurrences(),
        check_convergence_orders(),
        check_coverage(trials=coverage_trials),
        check_constants(),
        check_alpha(),
        check_reduction_consistency(),
    ]
