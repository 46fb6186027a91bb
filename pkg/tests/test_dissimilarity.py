import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from iini.dissimilarity import (
    MetricSpec,
    NeighbourView,
    cosine_dissimilarity,
    delta_d,
    evaluate,
    local_dissimilarity,
    neighbour_view,
    square_difference,
    total_energy,
)
from iini.errors import IsolatedPixel, RoleViolation

from _util import grid

SQ = MetricSpec()
COS = MetricSpec("cosine")
BOOST = MetricSpec(bias_policy="training_boost", beta=3.0)

unit = st.floats(0, 1)
angle = st.floats(-20, 20)
bias = st.floats(1, 10)


class TestSquareDifference:
    def test_identical(self):
        assert square_difference(NeighbourView.of(0.5, [0.5] * 4)) == 0.0

    def test_maximum(self):
        assert square_difference(NeighbourView.of(1.0, [0.0] * 4)) == 1.0

    def test_corner(self):
        assert square_difference(NeighbourView.of(0.5, [0.0, 1.0])) == 0.25

    def test_training_bias(self):
        nv = NeighbourView.of(0.0, [1.0, 0.0, 0.0, 0.0], [3, 1, 1, 1])
        assert square_difference(nv) == 0.5

    def test_isolated(self):
        with pytest.raises(IsolatedPixel):
            square_difference(NeighbourView.of(0.5, []))

    @settings(max_examples=100, deadline=None)
    @given(unit, st.lists(st.tuples(unit, bias), min_size=2, max_size=4), st.randoms())
    def test_permutation_and_bounds(self, p, nb, rnd):
        vals, bs = zip(*nb)
        d = square_difference(NeighbourView.of(p, vals, bs))
        order = list(range(len(vals)))
        rnd.shuffle(order)
        shuffled = NeighbourView.of(p, [vals[i] for i in order], [bs[i] for i in order])
        assert square_difference(shuffled) == pytest.approx(d, abs=1e-15)
        assert 0.0 <= d <= 1.0

    @settings(max_examples=100, deadline=None)
    @given(unit, st.lists(unit, min_size=2, max_size=4), st.floats(-5, 5))
    def test_translation(self, p, vals, c):
        a = square_difference(NeighbourView.of(p, vals))
        b = square_difference(NeighbourView.of(p + c, [v + c for v in vals]))
        assert b == pytest.approx(a, abs=1e-12)

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.tuples(unit, bias), min_size=2, max_size=4), unit)
    def test_weighted_mean_is_unique_minimizer(self, nb, probe):
        vals, bs = zip(*nb)
        mean = np.dot(bs, vals) / sum(bs)
        at_mean = square_difference(NeighbourView.of(mean, vals, bs))
        # strictly convex: the gap grows with the squared distance from the minimizer
        gap = square_difference(NeighbourView.of(probe, vals, bs)) - at_mean
        assert gap == pytest.approx((probe - mean) ** 2, abs=1e-12)


class TestCosine:
    def test_aligned(self):
        assert cosine_dissimilarity(NeighbourView.of(0.0, [0.0] * 4)) == -1.0

    def test_antipodal(self):
        assert cosine_dissimilarity(NeighbourView.of(0.0, [math.pi] * 4)) == 1.0

    def test_quadrants_cancel(self):
        nv = NeighbourView.of(0.0, [0, math.pi / 2, math.pi, 3 * math.pi / 2])
        assert cosine_dissimilarity(nv) == pytest.approx(0.0, abs=1e-15)

    @settings(max_examples=100, deadline=None)
    @given(angle, st.lists(st.tuples(angle, bias), min_size=2, max_size=4), st.integers(-3, 3))
    def test_bounds_and_period(self, p, nb, k):
        vals, bs = zip(*nb)
        d = cosine_dissimilarity(NeighbourView.of(p, vals, bs))
        assert -1.0 <= d <= 1.0
        shifted = NeighbourView.of(p + 2 * math.pi * k, [v - 2 * math.pi * k for v in vals], bs)
        assert cosine_dissimilarity(shifted) == pytest.approx(d, abs=1e-9)


class TestDeltaD:
    def test_same_value(self):
        g = grid([[0.5, np.nan, 0.5]])
        g.values[0, 1] = 0.3
        assert delta_d(g, (0, 1), 0.3, SQ) == 0.0

    def test_improving_move(self):
        g = grid([[0.5, 0.5, 0.5], [0.5, 0.0, 0.5], [0.5, 0.5, 0.5]])
        g.training[1, 1] = False
        assert delta_d(g, (1, 1), 0.5, SQ) == pytest.approx(-0.25, abs=1e-15)

    def test_worsening_move(self):
        g = grid(np.full((3, 3), 0.5))
        g.training[1, 1] = False
        assert delta_d(g, (1, 1), 1.0, SQ) == pytest.approx(0.25, abs=1e-15)

    def test_training_pixel_refused(self):
        with pytest.raises(RoleViolation):
            delta_d(grid(np.full((2, 2), 0.5)), (0, 0), 0.1, SQ)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.sampled_from([SQ, COS, BOOST]))
    def test_zero_at_current_value(self, seed, m):
        rng = np.random.default_rng(seed)
        g = grid(rng.random((4, 4)), training=rng.random((4, 4)) < 0.5)
        g.training[1, 2] = False
        assert delta_d(g, (1, 2), g.values[1, 2], m) == 0.0


class TestNeighbourhoods:
    def test_no_diagonals(self):
        g = grid(np.arange(9.0).reshape(3, 3))
        assert sorted(neighbour_view(g, 1, 1, SQ).values) == [1.0, 3.0, 5.0, 7.0]
        assert sorted(neighbour_view(g, 0, 0, SQ).values) == [1.0, 3.0]
        assert len(neighbour_view(g, 0, 1, SQ).values) == 3

    def test_boost_follows_role(self):
        g = grid([[0.1, np.nan, 0.2]])
        g.values[0, 1] = 0.5
        assert neighbour_view(g, 0, 1, BOOST).biases == (3.0, 3.0)
        assert neighbour_view(g, 0, 1, SQ).biases == (1.0, 1.0)

    def test_cosine_canonicalized(self):
        g = grid([[-math.pi / 2, 7.0]])
        nv = neighbour_view(g, 0, 0, COS)
        assert nv.center == pytest.approx(1.5 * math.pi)
        assert nv.values[0] == pytest.approx(7.0 - 2 * math.pi)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.sampled_from([SQ, COS, BOOST]))
    def test_vectorized_matches_scalar(self, seed, m):
        rng = np.random.default_rng(seed)
        g = grid(rng.random((5, 4)) * (6.0 if m.is_cosine else 1.0), training=rng.random((5, 4)) < 0.4)
        d = local_dissimilarity(g, m)
        for r in range(5):
            for c in range(4):
                assert d[r, c] == pytest.approx(evaluate(neighbour_view(g, r, c, m), m), abs=1e-12)
        assert total_energy(g, m) == pytest.approx(d[g.inference].sum(), abs=1e-12)

    def test_beta_below_one_rejected(self):
        with pytest.raises(ValueError):
            MetricSpec(bias_policy="training_boost", beta=0.5)
