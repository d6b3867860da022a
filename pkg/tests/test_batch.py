"""Batch execution must reproduce the scalar kernels exactly.

Round-to-nearest leaves no freedom: a batch column and the scalar run
see the same doubles, so results are compared bit for bit.  Stochastic
rounding uses fixed per-operation uniform slots, so the batch is
checked against an independent id-order replay fed the same slots, and
against itself across different trial groupings.
"""

import numpy as np
import pytest

from sumlab.batch import (
    batch_compensated,
    batch_quantize,
    batch_shifted_bounds,
    batch_shifted_sum,
    batch_tree_bounds,
    batch_tree_sum,
    level_schedule,
)
from sumlab.bounds import (
    ProbBudget,
    compensated_bounds,
    det_bounds,
    mixed_bounds,
    prob_bounds_general,
    shifted_bounds,
)
from sumlab.kernels import (
    _leaf_parent_precision,
    _quantize_inputs,
    choose_shift,
    run_compensated,
    run_shifted_sum,
    run_tree_sum,
)
from sumlab.refsum import two_prod, two_sum
from sumlab.rounding import Precision, RoundingMode, round_vector
from sumlab.trees import (
    build_fabsum,
    build_pairwise,
    build_sequential,
    tree_stats,
)

RTN = RoundingMode.NEAREST_TIES_EVEN
SR = RoundingMode.STOCHASTIC


def make_tree(kind, n, t=11):
    p = Precision(t)
    if kind == "seq":
        return build_sequential(n, p)
    if kind == "pairwise":
        return build_pairwise(n, p)
    return build_fabsum(n, 4, p_lo=Precision(t), p_hi=Precision(24))


def columns(rng, n, chunk, lo=-1.0, hi=1.0):
    return rng.uniform(lo, hi, size=(n, chunk))


class TestLevelSchedule:
    @pytest.mark.parametrize("kind", ["seq", "pairwise", "fabsum"])
    @pytest.mark.parametrize("n", [2, 3, 17, 64])
    def test_covers_every_node_after_its_children(self, kind, n):
        tree = make_tree(kind, n)
        sched = level_schedule(tree)
        seen = {}
        pos = 0
        for ids, _, _, t in sched.groups:
            for k in ids.tolist():
                seen[k] = pos
                assert tree.precision_t[k] == t
            pos += 1
        assert sorted(seen) == list(range(2, n + 1))
        for k in tree.internal_nodes:
            for ref in tree.children(k):
                if ref >= 2:
                    assert seen[ref] < seen[k]

    @pytest.mark.parametrize("kind", ["seq", "pairwise", "fabsum"])
    def test_height_matches_tree_stats(self, kind):
        tree = make_tree(kind, 37)
        assert level_schedule(tree).height == tree_stats(tree).height

    def test_groups_hold_one_precision_each(self):
        tree = make_tree("fabsum", 29)
        for ids, _, _, t in level_schedule(tree).groups:
            assert np.all(tree.precision_t[ids] == t)


class TestQuantize:
    @pytest.mark.parametrize("kind", ["seq", "fabsum"])
    def test_matches_scalar(self, kind):
        rng = np.random.default_rng(3)
        tree = make_tree(kind, 21)
        X = columns(rng, 21, 5)
        Xq = batch_quantize(tree, X)
        for j in range(5):
            ref, _ = _quantize_inputs(tree, X[:, j])
            np.testing.assert_array_equal(Xq[:, j], ref)

    def test_rejects_wrong_row_count(self):
        tree = make_tree("seq", 6)
        with pytest.raises(ValueError):
            batch_quantize(tree, np.zeros((5, 3)))


class TestTreeSum:
    @pytest.mark.parametrize("kind", ["seq", "pairwise", "fabsum"])
    @pytest.mark.parametrize("n", [2, 5, 33, 100])
    def test_rtn_bit_identity(self, kind, n):
        rng = np.random.default_rng(n)
        tree = make_tree(kind, n)
        X = columns(rng, n, 4)
        res = batch_tree_sum(tree, X, RTN)
        for j in range(4):
            run = run_tree_sum(tree, X[:, j], RTN)
            assert res.computed[j] == run.computed[n]
            np.testing.assert_array_equal(res.xq[:, j], run.x)
            np.testing.assert_array_equal(
                res.s[2:, j], run.exact_hi[2:] + run.exact_lo[2:]
            )
            assert res.exact_hi[j] == run.exact_hi[n]
            assert res.exact_lo[j] == run.exact_lo[n]
            assert abs(res.rel_error()[j] - run.relative_error()) <= 1e-15

    def test_sr_matches_id_order_replay(self):
        # replays each emulated addition one at a time, in node-id order
        # rather than level order, pulling the uniform from slot k-2
        rng = np.random.default_rng(8)
        tree = make_tree("pairwise", 24, t=7)
        X = columns(rng, 24, 3)
        U = rng.random((23, 3))
        res = batch_tree_sum(tree, X, SR, uniforms=U)
        for j in range(3):
            xq, _ = _quantize_inputs(tree, X[:, j])
            vals = np.zeros(tree.n + 1)
            for k in tree.internal_nodes:
                l, r = tree.children(k)
                a = xq[-l - 1] if l < 0 else vals[l]
                b = xq[-r - 1] if r < 0 else vals[r]
                vals[k] = round_vector(
                    np.array([a + b]),
                    tree.node_precision(k),
                    SR,
                    np.array([U[k - 2, j]]),
                )[0]
            assert res.computed[j] == vals[tree.n]

    def test_sr_invariant_under_chunking(self):
        rng = np.random.default_rng(9)
        tree = make_tree("seq", 40, t=6)
        X = columns(rng, 40, 8)
        U = rng.random((39, 8))
        whole = batch_tree_sum(tree, X, SR, uniforms=U)
        parts = [
            batch_tree_sum(tree, X[:, a:b], SR, uniforms=U[:, a:b]).computed
            for a, b in [(0, 3), (3, 4), (4, 8)]
        ]
        np.testing.assert_array_equal(whole.computed, np.concatenate(parts))

    def test_sr_requires_uniforms(self):
        tree = make_tree("seq", 4)
        with pytest.raises(ValueError):
            batch_tree_sum(tree, np.ones((4, 2)), SR)

    def test_error_is_exact_difference(self):
        rng = np.random.default_rng(12)
        tree = make_tree("pairwise", 16, t=5)
        X = columns(rng, 16, 4)
        res = batch_tree_sum(tree, X, RTN)
        for j in range(4):
            d, e = two_sum(res.computed[j], -res.exact_hi[j])
            hi, lo = two_sum(d, e - res.exact_lo[j])
            assert res.error[j] == hi + lo


class TestTreeBounds:
    @pytest.mark.parametrize("kind", ["seq", "pairwise"])
    def test_mono_matches_scalar_engine(self, kind):
        rng = np.random.default_rng(21)
        tree = make_tree(kind, 50)
        u = Precision(11).u
        X = columns(rng, 50, 6)
        res = batch_tree_sum(tree, X, RTN)
        got = batch_tree_bounds(tree, res.s, res.xq, RTN)
        for j in range(6):
            s = res.s[:, j]
            ref = det_bounds(tree, s, res.xq[:, j], u)
            ref.update(prob_bounds_general(tree, s, res.xq[:, j], u, ProbBudget()))
            assert set(got) == set(ref)
            for key, v in ref.items():
                assert got[key][j] == pytest.approx(v, rel=1e-12)

    def test_sr_doubles_u(self):
        rng = np.random.default_rng(22)
        tree = make_tree("pairwise", 32)
        u = Precision(11).u
        X = columns(rng, 32, 3)
        res = batch_tree_sum(tree, X, RTN)
        got = batch_tree_bounds(tree, res.s, res.xq, SR)
        for j in range(3):
            ref = prob_bounds_general(
                tree, res.s[:, j], res.xq[:, j], 2.0 * u, ProbBudget()
            )
            for key, v in ref.items():
                assert got[key][j] == pytest.approx(v, rel=1e-12)

    def test_mixed_fabsum_matches_scalar_engine(self):
        rng = np.random.default_rng(23)
        tree = make_tree("fabsum", 45)
        X = columns(rng, 45, 4)
        res = batch_tree_sum(tree, X, RTN)
        fab = (4, Precision(11).u, Precision(24).u)
        got = batch_tree_bounds(tree, res.s, res.xq, RTN, fabsum=fab)
        for j in range(4):
            ref = mixed_bounds(tree, res.s[:, j], res.xq[:, j], ProbBudget(), fabsum=fab)
            assert set(got) == set(ref)
            for key, v in ref.items():
                assert got[key][j] == pytest.approx(v, rel=1e-12)


class TestShifted:
    @pytest.mark.parametrize("kind", ["seq", "pairwise"])
    @pytest.mark.parametrize("n", [2, 9, 40])
    def test_rtn_bit_identity(self, kind, n):
        rng = np.random.default_rng(n + 1)
        tree = make_tree(kind, n, t=13)
        X = columns(rng, n, 4, lo=99.0, hi=101.0)
        res = batch_shifted_sum(tree, X, RTN)
        for j in range(4):
            c = choose_shift(X[:, j], tree.node_precision(tree.root))
            assert res.c[j] == c
            run = run_shifted_sum(tree, X[:, j], c, RTN)
            assert res.computed[j] == run.final_sum
            np.testing.assert_array_equal(
                res.y[1:, j], run.y_exact_hi[1:] + run.y_exact_lo[1:]
            )
            np.testing.assert_array_equal(
                res.t[2:, j], run.exact_hi[2:] + run.exact_lo[2:]
            )

    def test_sr_matches_slot_replay(self):
        # shift k-1 at slot k-1, scale at n, node k at n+k-1, close at 2n
        rng = np.random.default_rng(31)
        n = 11
        tree = make_tree("seq", n, t=9)
        X = columns(rng, n, 2, lo=5.0, hi=7.0)
        U = rng.random((2 * n + 1, 2))
        res = batch_shifted_sum(tree, X, SR, uniforms=U)
        p = tree.node_precision(tree.root)
        leaf_t = _leaf_parent_precision(tree)
        for j in range(2):
            xq, _ = _quantize_inputs(tree, X[:, j])
            c = choose_shift(X[:, j], p)

            def rnd(z, prec, slot):
                return round_vector(
                    np.array([z]), prec, SR, np.array([U[slot, j]])
                )[0]

            y = [rnd(xq[i] - c, Precision(int(leaf_t[i])), i) for i in range(n)]
            mass = rnd(n * c, p, n)
            vals = np.zeros(n + 1)
            for k in tree.internal_nodes:
                l, r = tree.children(k)
                a = y[-l - 1] if l < 0 else vals[l]
                b = y[-r - 1] if r < 0 else vals[r]
                vals[k] = rnd(a + b, tree.node_precision(k), n + k - 1)
            assert res.computed[j] == rnd(vals[n] + mass, p, 2 * n)

    def test_exact_bookkeeping(self):
        rng = np.random.default_rng(33)
        n = 14
        tree = make_tree("seq", n, t=10)
        X = columns(rng, n, 3, lo=-3.0, hi=9.0)
        res = batch_shifted_sum(tree, X, RTN)
        for j in range(3):
            # shifted values plus the shift mass recover the input sum
            ph, pl = two_prod(float(n), res.c[j])
            assert res.y[n + 1, j] == ph + pl
            total = np.sum(res.y[1 : n + 1, j]) + n * res.c[j]
            assert total == pytest.approx(res.s_hi[j] + res.s_lo[j], rel=1e-13)

    def test_bounds_match_scalar_engine(self):
        rng = np.random.default_rng(34)
        n = 25
        tree = make_tree("pairwise", n, t=13)
        u = Precision(13).u
        X = columns(rng, n, 4, lo=99.0, hi=101.0)
        res = batch_shifted_sum(tree, X, RTN)
        got = batch_shifted_bounds(res, u, RTN)
        h = tree_stats(tree).height + 2
        for j in range(4):
            ref = shifted_bounds(
                res.y[:, j],
                res.t[:, j],
                res.s_hi[j] + res.s_lo[j],
                res.c[j],
                h,
                u,
                ProbBudget(),
            )
            assert set(got) == set(ref)
            for key, v in ref.items():
                assert got[key][j] == pytest.approx(v, rel=1e-12)


class TestCompensated:
    @pytest.mark.parametrize("n", [2, 3, 30, 80])
    def test_rtn_bit_identity(self, n):
        rng = np.random.default_rng(n + 5)
        p = Precision(11)
        X = columns(rng, n, 4)
        res = batch_compensated(X, p, RTN)
        for j in range(4):
            run, _ = run_compensated(X[:, j], p, RTN)
            assert res.computed[j] == run.computed[n]
            assert abs(res.rel_error()[j] - run.relative_error()) <= 1e-15

    def test_sr_matches_slot_replay(self):
        rng = np.random.default_rng(41)
        n = 9
        p = Precision(8)
        X = columns(rng, n, 2)
        U = rng.random((4 * (n - 1), 2))
        res = batch_compensated(X, p, SR, uniforms=U)
        for j in range(2):
            xq = round_vector(X[:, j], p, RTN)

            def rnd(z, slot):
                return round_vector(np.array([z]), p, SR, np.array([U[slot, j]]))[0]

            s, c = xq[0], 0.0
            for k in range(2, n + 1):
                base = 4 * (k - 2)
                y = rnd(xq[k - 1] - c, base)
                t = rnd(s + y, base + 1)
                z = rnd(t - s, base + 2)
                c = rnd(z - y, base + 3)
                s = t
            assert res.computed[j] == s

    def test_fused_bounds_match_scalar_engine(self):
        rng = np.random.default_rng(42)
        n = 60
        p = Precision(11)
        X = columns(rng, n, 5)
        res = batch_compensated(X, p, RTN)
        for j in range(5):
            run, _ = run_compensated(X[:, j], p, RTN)
            s = run.exact_hi + run.exact_lo
            s[:2] = 0.0
            ref = compensated_bounds(run.x, s, p.u, ProbBudget())
            assert set(res.bounds) == set(ref)
            for key, v in ref.items():
                assert res.bounds[key][j] == pytest.approx(v, rel=1e-12)

    def test_sr_bounds_double_u(self):
        rng = np.random.default_rng(43)
        n = 20
        p = Precision(11)
        X = columns(rng, n, 2)
        U = rng.random((4 * (n - 1), 2))
        res = batch_compensated(X, p, SR, uniforms=U)
        for j in range(2):
            run, _ = run_compensated(X[:, j], p, RTN)
            s = run.exact_hi + run.exact_lo
            s[:2] = 0.0
            ref = compensated_bounds(run.x, s, 2.0 * p.u, ProbBudget())
            for key, v in ref.items():
                assert res.bounds[key][j] == pytest.approx(v, rel=1e-12)

    def test_rejects_single_summand(self):
        with pytest.raises(ValueError):
            batch_compensated(np.ones((1, 3)), Precision(11), RTN)
