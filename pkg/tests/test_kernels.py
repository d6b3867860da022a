"""Traced kernels: trace shape, determinism, and reference values."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sumlab import Precision, RoundingMode, build_pairwise, build_random_tree, build_sequential
from sumlab.kernels import choose_shift, run_compensated, run_fabsum, run_shifted_sum, run_tree_sum

RTN = RoundingMode.NEAREST_TIES_EVEN
SR = RoundingMode.STOCHASTIC


def uniform_inputs(n, seed):
    return np.random.default_rng(seed).random(n)


class TestRunTreeSum:
    def test_trace_has_one_record_per_internal_node(self):
        for n in (2, 5, 33):
            run = run_tree_sum(build_pairwise(n), uniform_inputs(n, 0), RTN)
            assert len(run.trace) == n - 1
            assert sorted(r.op_id for r in run.trace) == list(range(2, n + 1))
            assert all(r.role == "sum" for r in run.trace)

    def test_exactly_representable_inputs_sum_exactly(self):
        x = np.array([0.25, 0.25, 0.25, 0.25])
        for tree in (build_sequential(4), build_pairwise(4)):
            run = run_tree_sum(tree, x, RTN)
            assert run.error() == 0.0
            assert all(r.delta == 0.0 for r in run.trace)

    def test_error_is_computed_minus_exact(self):
        run = run_tree_sum(build_sequential(50, Precision(8)), uniform_inputs(50, 3), RTN)
        assert run.error() == pytest.approx(run.computed_sum - run.exact[50], abs=1e-16)
        assert run.error() != 0.0

    def test_input_quantization_excluded_from_error(self):
        # inputs needing 30 bits at t=11: quantization recorded, x stores the
        # rounded values, and the exact reference sums those rounded values
        x = np.array([1 + 2.0**-30, 1 + 2.0**-30, 1 + 2.0**-30])
        run = run_tree_sum(build_sequential(3, Precision(11)), x, RTN)
        assert np.all(run.x == 1.0)
        assert np.all(run.input_quantization != 0.0)
        assert run.exact[3] == 3.0
        assert run.error() == 0.0

    def test_seed_determinism(self):
        x = uniform_inputs(64, 9)
        tree = build_random_tree(64, np.random.default_rng(4), Precision(11))
        a = run_tree_sum(tree, x, SR, np.random.default_rng(77))
        b = run_tree_sum(tree, x, SR, np.random.default_rng(77))
        assert a.computed_sum == b.computed_sum
        assert [r.delta for r in a.trace] == [r.delta for r in b.trace]

    def test_sr_deltas_within_2u(self):
        p = Precision(8)
        run = run_tree_sum(build_sequential(200, p), uniform_inputs(200, 5), SR, np.random.default_rng(1))
        assert all(abs(r.delta) <= 2 * p.u for r in run.trace)
        assert any(r.delta != 0.0 for r in run.trace)

    @given(seed=st.integers(0, 2**31), t=st.sampled_from([8, 11, 24]))
    @settings(max_examples=30, deadline=None)
    def test_error_small_relative_to_sum(self, seed, t):
        # crude sanity: relative error of a 100-term uniform sum stays far
        # below n*u even before appealing to the sharper bounds
        p = Precision(t)
        x = uniform_inputs(100, seed)
        run = run_tree_sum(build_sequential(100, p), x, RTN)
        assert run.relative_error() < 100 * p.u


class TestShifted:
    def test_trace_length_and_roles(self):
        n = 12
        run = run_shifted_sum(build_sequential(n), uniform_inputs(n, 1), 0.5, RTN)
        assert len(run.trace) == 2 * n + 1
        roles = [r.role for r in run.trace]
        assert roles == ["shift"] * n + ["scale"] + ["sum"] * (n - 1) + ["final"]

    def test_zero_shift_reduces_to_plain_tree_sum(self):
        n = 40
        x = uniform_inputs(n, 2)
        tree = build_sequential(n, Precision(11))
        for mode, rng_seed in ((RTN, None), (SR, 11)):
            rng = None if rng_seed is None else np.random.default_rng(rng_seed)
            plain = run_tree_sum(tree, x, mode, rng)
            rng = None if rng_seed is None else np.random.default_rng(rng_seed)
            shifted = run_shifted_sum(tree, x, 0.0, mode, rng)
            assert shifted.computed_sum == plain.computed_sum
            assert shifted.error() == plain.error()
            pre = shifted.trace[: n + 1]
            assert all(r.delta == 0.0 for r in pre)

    def test_perfectly_centered_data(self):
        # every y_k = 0; only the n*c product can round
        n, c = 7, 0.625
        run = run_shifted_sum(build_sequential(n, Precision(11)), np.full(n, c), c, RTN)
        assert np.all(run.y_hat[1 : n + 1] == 0.0)
        assert run.computed_sum == run.y_hat[n + 1]

    def test_shift_reduces_error_for_offset_data(self):
        n = 10**3
        x = uniform_inputs(n, 7)
        p = Precision(11)
        tree = build_sequential(n, p)
        plain = run_tree_sum(tree, x, RTN)
        c = choose_shift(x, p)
        shifted = run_shifted_sum(tree, x, c, RTN)
        assert shifted.relative_error() < plain.relative_error()

    def test_exact_y_reference_values(self):
        n = 5
        x = uniform_inputs(n, 13)
        run = run_shifted_sum(build_sequential(n, Precision(24)), x, 0.5, RTN)
        y = run.y_exact_hi[1 : n + 1] + run.y_exact_lo[1 : n + 1]
        assert y == pytest.approx(run.x - 0.5, rel=1e-15)
        assert run.y_exact_hi[n + 1] == pytest.approx(n * 0.5)


class TestChooseShift:
    def test_two_points(self):
        assert choose_shift(np.array([0.0, 1.0]), Precision(11)) == 0.5

    def test_constant_vector(self):
        assert choose_shift(np.array([0.375, 0.375, 0.375]), Precision(11)) == 0.375

    def test_uniform_midpoint_near_half(self):
        x = uniform_inputs(10**5, 21)
        assert abs(choose_shift(x, Precision(24)) - 0.5) < 0.01

    def test_result_is_representable(self):
        p = Precision(5)
        c = choose_shift(uniform_inputs(100, 3), p)
        from sumlab import round_value

        assert round_value(c, p, RTN) == c

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            choose_shift(np.array([]), Precision(11))


class TestCompensated:
    def test_trace_four_records_per_step(self):
        n = 9
        run, comp = run_compensated(uniform_inputs(n, 1), Precision(11), RTN)
        assert len(run.trace) == 4 * (n - 1)
        roles = [r.role for r in run.trace]
        assert roles == ["y", "s", "z", "c"] * (n - 1)

    def test_first_correction_subtraction_exact(self):
        run, comp = run_compensated(uniform_inputs(6, 2), Precision(11), RTN)
        assert comp.eta[2] == 0.0
        assert comp.c_hat[1] == 0.0

    def test_powers_of_two_exact(self):
        x = np.array([2.0, 2.0, 2.0, 2.0])
        run, _ = run_compensated(x, Precision(11), RTN)
        assert run.error() == 0.0

    def test_tracks_plain_recurrences(self):
        from sumlab import emulated_add, emulated_sub

        n = 30
        x = uniform_inputs(n, 5)
        p = Precision(11)
        run, comp = run_compensated(x, p, RTN)
        # re-execute the four update lines from the stored machine values
        for k in range(2, n + 1):
            y, _ = emulated_sub(float(run.x[k - 1]), float(comp.c_hat[k - 1]), p, RTN)
            s, _ = emulated_add(float(comp.s_hat[k - 1]), y, p, RTN)
            z, _ = emulated_sub(s, float(comp.s_hat[k - 1]), p, RTN)
            c, _ = emulated_sub(z, y, p, RTN)
            assert (y, s, z, c) == (comp.y_hat[k], comp.s_hat[k], comp.z_hat[k], comp.c_hat[k])

    def test_error_stays_near_u_for_long_sums(self):
        p = Precision(11)
        n = 10**4
        run, _ = run_compensated(uniform_inputs(n, 8), p, RTN)
        plain = run_tree_sum(build_sequential(n, p), uniform_inputs(n, 8), RTN)
        assert run.relative_error() < 4 * p.u
        assert run.relative_error() < plain.relative_error() / 10

    def test_rejects_single_element(self):
        with pytest.raises(ValueError):
            run_compensated(np.array([1.0]), Precision(11), RTN)


class TestFabsum:
    def test_degenerate_block_sizes(self):
        x = uniform_inputs(16, 4)
        all_lo = run_fabsum(x, 16, Precision(11), Precision(24))
        assert all(r.bound == Precision(11).u for r in all_lo.trace)
        all_hi = run_fabsum(x, 1, Precision(11), Precision(24))
        assert all(r.bound == Precision(24).u for r in all_hi.trace)

    def test_matches_tree_sum_on_blocked_tree(self):
        from sumlab import build_fabsum

        x = uniform_inputs(37, 6)
        tree = build_fabsum(37, 8, p_lo=Precision(11), p_hi=Precision(24))
        direct = run_tree_sum(tree, x, RTN)
        conv = run_fabsum(x, 8, Precision(11), Precision(24))
        assert conv.computed_sum == direct.computed_sum

    def test_high_outer_precision_beats_all_low(self):
        x = uniform_inputs(4096, 10)
        blocked = run_fabsum(x, 32, Precision(11), Precision(24))
        flat = run_tree_sum(build_sequential(4096, Precision(11)), x, RTN)
        assert blocked.relative_error() < flat.relative_error()
