"""Self-check suites at reduced scale, plus the trend evaluators on
synthetic rows."""

import numpy as np
import pytest

from sumlab.harness import ExperimentRow
from sumlab.rounding import RoundingMode
from sumlab.verify import (
    CheckResult,
    check_alpha,
    check_compensated_recurrences,
    check_constants,
    check_convergence_orders,
    check_coverage,
    check_deterministic_domination,
    check_error_identities,
    check_reduction_consistency,
    trend_compensated,
    trend_shifted,
    trend_tree,
)

RTN = RoundingMode.NEAREST_TIES_EVEN
SR = RoundingMode.STOCHASTIC


def test_line_format():
    assert CheckResult("x", True, "d").line() == "PASS: x: d"
    assert CheckResult("x", False, "d").line() == "FAIL: x: d"


class TestSuites:
    def test_error_identities(self):
        result = check_error_identities(configs=12)
        assert result.passed, result.detail

    def test_compensated_recurrences(self):
        result = check_compensated_recurrences(runs=10)
        assert result.passed, result.detail

    def test_constants(self):
        result = check_constants()
        assert result.passed, result.detail

    def test_alpha(self):
        result = check_alpha()
        assert result.passed, result.detail

    def test_convergence_orders(self):
        result = check_convergence_orders()
        assert result.passed, result.detail
        assert "slope" in result.detail

    def test_coverage_small(self):
        result = check_coverage(trials=120, n=2000)
        assert result.passed, result.detail
        assert "120 trials" in result.detail

    def test_reduction_consistency(self):
        result = check_reduction_consistency(instances=10)
        assert result.passed, result.detail


def _rows(experiment, mode, medians, bounds=None):
    return [
        ExperimentRow(
            experiment=experiment, n=n, mode=mode, trial=0, rel_error=v,
            bounds=bounds or {}, seed=1,
        )
        for n, v in medians.items()
    ]


class TestDomination:
    def test_passes_when_dominated(self):
        rows = _rows("seq", RTN, {100: 1e-4}, bounds={"DET_PARTIAL": 1e-3, "DET_INPUTS": 2e-3})
        result = check_deterministic_domination(rows)
        assert result.passed and "2 bound evaluations" in result.detail

    def test_fails_on_exceedance(self):
        rows = _rows("seq", SR, {100: 5e-3}, bounds={"DET_INPUTS": 1e-3})
        result = check_deterministic_domination(rows)
        assert not result.passed and "DET_INPUTS" in result.detail


class TestTrends:
    def grown(self, c, p):
        return {n: c * n**p for n in (100, 1000, 10000)}

    def test_tree_growth_passes(self):
        rows = _rows("seq", SR, self.grown(1e-4, 0.5)) + _rows(
            "pairwise", SR, self.grown(2e-4, 0.02)
        )
        result = trend_tree(rows)
        assert result.passed, result.detail

    def test_tree_growth_rejects_flat_sequential(self):
        rows = _rows("seq", SR, self.grown(1e-4, 0.05)) + _rows(
            "pairwise", SR, self.grown(2e-5, 0.02)
        )
        assert not trend_tree(rows).passed

    def test_tree_growth_rejects_weak_contrast(self):
        rows = _rows("seq", SR, self.grown(1e-4, 0.5)) + _rows(
            "pairwise", SR, self.grown(4e-3, 0.02)
        )
        assert not trend_tree(rows).passed

    def test_tree_growth_needs_grid(self):
        rows = _rows("seq", SR, {100: 1e-3}) + _rows("pairwise", SR, {100: 1e-4})
        assert not trend_tree(rows).passed

    def shifted_rows(self, level):
        rows = []
        for experiment in ("shifted-seq", "shifted-pairwise"):
            for mode in (RTN, SR):
                rows += _rows(experiment, mode, self.grown(level, 0.0))
        return rows

    def test_shifted_cap(self):
        cap = 10.0 * 2.0**-11
        assert trend_shifted(self.shifted_rows(cap / 20)).passed
        assert not trend_shifted(self.shifted_rows(cap * 2)).passed

    def test_shifted_requires_both_variants(self):
        rows = [r for r in self.shifted_rows(1e-4) if r.experiment == "shifted-seq"]
        result = trend_shifted(rows)
        assert not result.passed and "no rows" in result.detail

    def test_compensated_cap(self):
        good = _rows("compensated", RTN, self.grown(1e-5, 0.0)) + _rows(
            "compensated", SR, self.grown(1e-5, 0.0)
        )
        assert trend_compensated(good).passed
        bad = _rows("compensated", RTN, self.grown(1e-1, 0.0)) + _rows(
            "compensated", SR, self.grown(1e-5, 0.0)
        )
        assert not trend_compensated(bad).passed


def test_medians_use_the_middle_row():
    spread = [
        ExperimentRow("seq", 100, SR, j, v, {}, 1)
        for j, v in enumerate((1e-6, 1e-2, 2e-2))
    ]
    flat = _rows("pairwise", SR, {100: 1.0})
    from sumlab.verify import _medians

    ns, meds = _medians(spread + flat, "seq", SR)
    assert ns == [100] and meds == [pytest.approx(1e-2)]
