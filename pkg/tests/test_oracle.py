import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from iini.dissimilarity import MetricSpec, total_energy
from iini.errors import TooLarge, UnconstrainedSegment
from iini.grid import NormParams, PixelGrid, ScatterSet, ValueSet
from iini.oracle import assemble, brute_force_discrete, holdout_rmse, idw_baseline, solve_harmonic

from _util import covered_grid, grid

SQ = MetricSpec()


class TestHarmonic:
    def test_chain_one_unknown(self):
        assert solve_harmonic(grid([[0.0, np.nan, 1.0]])).values[0, 1] == pytest.approx(0.5, abs=1e-15)

    def test_chain_two_unknowns(self):
        out = solve_harmonic(grid([[0.0, np.nan, np.nan, 1.0]]))
        np.testing.assert_allclose(out.values[0, 1:3], [1 / 3, 2 / 3], rtol=0, atol=1e-15)

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.floats(0, 1), min_size=8, max_size=8))
    def test_single_centre(self, ring):
        v = np.zeros((3, 3))
        v[[0, 0, 0, 1, 1, 2, 2, 2], [0, 1, 2, 0, 2, 0, 1, 2]] = ring
        g = grid(v)
        g.training[1, 1] = False
        out = solve_harmonic(g)
        assert out.values[1, 1] == pytest.approx((v[0, 1] + v[2, 1] + v[1, 0] + v[1, 2]) / 4, abs=1e-14)

    @pytest.mark.parametrize("seed", range(4))
    def test_mean_value_and_maximum_principle(self, seed):
        g = covered_grid(20, 20, 0.15, np.random.default_rng(seed))
        out = solve_harmonic(g)
        v = out.values
        pad = np.pad(v, 1, constant_values=np.nan)
        nb = np.stack([pad[:-2, 1:-1], pad[2:, 1:-1], pad[1:-1, :-2], pad[1:-1, 2:]])
        assert np.abs(v - np.nanmean(nb, axis=0))[g.inference].max() < 1e-9
        train = v[g.training]
        assert train.min() <= v.min() and v.max() <= train.max()

    def test_biased_system(self):
        boost = MetricSpec(bias_policy="training_boost", beta=3.0)
        out = solve_harmonic(grid([[1.0, np.nan, np.nan]]), boost)
        # the unknowns chain to a single anchor: both must reach it
        np.testing.assert_allclose(out.values[0], [1.0, 1.0, 1.0], atol=1e-12)

    def test_unconstrained_segment(self):
        with pytest.raises(UnconstrainedSegment):
            solve_harmonic(grid([[np.nan, np.nan], [np.nan, np.nan]]))
        # a second segment walled off from the first by Training cells is still anchored
        t = np.ones((4, 4), bool)
        t[0, 0] = t[3, 3] = t[3, 2] = t[2, 3] = False
        out = solve_harmonic(PixelGrid(np.where(t, 0.5, np.nan), t))
        np.testing.assert_allclose(out.values, 0.5, atol=1e-14)

    def test_rejects_cosine(self):
        with pytest.raises(ValueError):
            solve_harmonic(grid([[0.0, np.nan]]), MetricSpec("cosine"))

    def test_assembled_matrix_is_symmetric_when_unbiased(self):
        g = covered_grid(8, 8, 0.3, np.random.default_rng(0))
        a = assemble(g, SQ).matrix().toarray()
        np.testing.assert_array_equal(a, a.T)


class TestBruteForce:
    def test_tie_goes_low(self):
        g = grid(np.full((3, 3), 0.5))
        g.training[1, 1] = False
        assert brute_force_discrete(g, SQ, ValueSet(1 / 50)).values[1, 1] == pytest.approx(0.49)

    def test_exact_member(self):
        g = grid([[0.125, np.nan]])
        assert brute_force_discrete(g, SQ, ValueSet(1 / 4)).values[0, 1] == 0.125

    def test_nothing_to_infer(self):
        g = grid([[0.1, 0.2]])
        np.testing.assert_array_equal(brute_force_discrete(g, SQ, ValueSet(0.1)).values, g.values)

    def test_cap(self):
        with pytest.raises(TooLarge):
            brute_force_discrete(grid(np.full((4, 4), np.nan)), SQ, ValueSet(0.5))
        with pytest.raises(TooLarge):
            brute_force_discrete(grid([[0.0] + [np.nan] * 6]), SQ, ValueSet(0.02))

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_matches_exhaustive_python_search(self, seed):
        rng = np.random.default_rng(seed)
        g = grid(rng.random((3, 3)))
        g.training[rng.choice(3, 2, replace=False), rng.choice(3, 2, replace=False)] = False
        vs = ValueSet(0.25)
        best = brute_force_discrete(g, SQ, vs)
        pix = np.flatnonzero(g.inference.ravel())
        energies = []
        for assignment in np.ndindex(*(len(vs),) * pix.size):
            t = g.copy()
            t.values.reshape(-1)[pix] = vs.values[list(assignment)]
            energies.append(total_energy(t, SQ))
        assert total_energy(best, SQ) == pytest.approx(min(energies), abs=1e-12)

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(0, 1), min_size=4, max_size=4), st.sampled_from([0.02, 0.1, 0.25]))
    def test_single_pixel_agrees_with_snapped_oracle(self, nb, eps):
        v = np.full((3, 3), 0.0)
        v[0, 1], v[2, 1], v[1, 0], v[1, 2] = nb
        g = grid(v)
        g.training[1, 1] = False
        vs = ValueSet(eps)
        exact = solve_harmonic(g).values[1, 1]
        got = brute_force_discrete(g, SQ, vs).values[1, 1]
        # either neighbour member is fine when the optimum sits halfway between them
        assert abs(got - exact) <= abs(vs.snap(exact) - exact) + 1e-12


class TestIdw:
    def _target(self):
        return PixelGrid(np.full((1, 3), np.nan), np.zeros((1, 3), bool), cell_size=1.0, origin=(0.0, 0.0))

    def test_single_point(self):
        out = idw_baseline(ScatterSet([0.3], [0.2], [4.2]), self._target())
        np.testing.assert_array_equal(out.values, [[4.2, 4.2, 4.2]])

    def test_equidistant(self):
        out = idw_baseline(ScatterSet([0.5, 2.5], [1.5, 1.5], [0.0, 1.0]), self._target(), power=3)
        assert out.values[0, 1] == pytest.approx(0.5, abs=1e-15)

    def test_hand_value(self):
        # centre (1.5, 0.5): one point at distance 1, the other at distance 2
        out = idw_baseline(ScatterSet([1.5, 1.5], [1.5, 2.5], [0.0, 1.0]), self._target(), power=2)
        assert out.values[0, 1] == pytest.approx(0.2, abs=1e-15)

    def test_coincident_point_is_exact(self):
        out = idw_baseline(ScatterSet([0.5, 9.0], [0.5, 9.0], [3.0, 100.0]), self._target())
        assert out.values[0, 0] == 3.0

    def test_denormalized_training_kept(self):
        g = PixelGrid([[0.0, np.nan, 1.0]], [[True, False, True]], norm=NormParams(10.0, 20.0))
        out = idw_baseline(ScatterSet([0.5, 2.5], [0.5, 0.5], [10.0, 20.0]), g)
        np.testing.assert_allclose(out.values, [[10.0, 15.0, 20.0]])


class TestHoldout:
    def _pred(self):
        return PixelGrid([[1.0, 2.0], [3.0, 4.0]], np.zeros((2, 2), bool))

    def test_exact(self):
        s = ScatterSet([0.5, 1.5, 0.5], [0.5, 0.5, 1.5], [1.0, 2.0, 3.0])
        assert holdout_rmse(self._pred(), s).rmse == 0.0

    def test_hand_value(self):
        s = ScatterSet([0.5, 1.5], [0.5, 0.5], [4.0, 6.0])
        assert holdout_rmse(self._pred(), s).rmse == pytest.approx(math.sqrt(12.5), abs=1e-15)

    def test_denormalizes(self):
        g = PixelGrid([[0.0, 0.5]], [[True, False]], norm=NormParams(100.0, 300.0))
        assert holdout_rmse(g, ScatterSet([1.5], [0.5], [203.0])).rmse == pytest.approx(3.0)

    def test_outside_points_skipped(self):
        score = holdout_rmse(self._pred(), ScatterSet([0.5, 7.0], [0.5, 7.0], [1.0, 0.0]))
        assert (score.rmse, score.n_points, score.skipped) == (0.0, 1, 1)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(1, 20), st.integers(0, 2**32 - 1))
    def test_order_and_duplication_invariant(self, n, seed):
        rng = np.random.default_rng(seed)
        pts = np.column_stack([rng.uniform(0, 2, n), rng.uniform(0, 2, n), rng.normal(size=n) * 10])
        base = holdout_rmse(self._pred(), ScatterSet.from_points(pts)).rmse
        perm = holdout_rmse(self._pred(), ScatterSet.from_points(pts[rng.permutation(n)])).rmse
        dup = holdout_rmse(self._pred(), ScatterSet.from_points(np.vstack([pts, pts]))).rmse
        assert perm == base
        assert dup == pytest.approx(base, rel=1e-14)
