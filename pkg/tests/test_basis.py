"""B-spline, SiLU, and bump-basis behavior against independent oracles."""

import math

import numpy as np
import pytest

from kanshift.basis import (
    EvaluationError,
    KnotGrid,
    bspline_basis,
    bspline_basis_and_deriv,
    default_width,
    grbf_basis,
    grbf_basis_and_deriv,
    refit_coefficients,
    rswaf_basis,
    rswaf_basis_and_deriv,
    silu,
    silu_grad,
    uniform_centers,
)


def cox_de_boor(i, k, x, t):
    """Independent scalar Cox-de Boor recursion used as the test oracle."""
    if k == 0:
        return 1.0 if t[i] <= x < t[i + 1] else 0.0
    left = right = 0.0
    if t[i + k] > t[i]:
        left = (x - t[i]) / (t[i + k] - t[i]) * cox_de_boor(i, k - 1, x, t)
    if t[i + k + 1] > t[i + 1]:
        right = (t[i + k + 1] - x) / (t[i + k + 1] - t[i + 1]) * cox_de_boor(i + 1, k - 1, x, t)
    return left + right


class TestKnotGrid:
    def test_knot_vector_layout(self):
        g = KnotGrid(0.0, 1.0, 4, 2)
        knots = g.knots()
        assert knots.size == 4 + 2 * 2 + 1
        assert np.allclose(np.diff(knots), g.step)
        assert knots[g.degree] == 0.0 and knots[g.degree + g.grid_size] == 1.0
        assert g.num_bases == 6

    @pytest.mark.parametrize(
        "kwargs", [dict(lo=1.0, hi=0.0), dict(grid_size=0), dict(degree=-1), dict(lo=np.nan)]
    )
    def test_invalid_grids_rejected(self, kwargs):
        with pytest.raises(ValueError):
            KnotGrid(**{**dict(lo=0.0, hi=1.0, grid_size=3, degree=2), **kwargs})


class TestBsplineBasis:
    def test_degree_zero_indicator(self):
        assert bspline_basis(0.5, KnotGrid(0.0, 1.0, 1, 0)).tolist() == [1.0]

    def test_partition_of_unity_interior(self):
        g = KnotGrid(-1.0, 1.0, 5, 3)
        xs = np.random.default_rng(0).uniform(-1 + g.step, 1 - g.step, 500)
        sums = bspline_basis(xs, g).sum(axis=1)
        assert np.max(np.abs(sums - 1.0)) < 1e-12

    def test_matches_frozen_recursion_oracle(self):
        # values computed by the standalone Cox-de Boor recursion above
        g = KnotGrid(0.0, 1.0, 2, 2)
        assert np.allclose(bspline_basis(0.5, g), [0.0, 0.5, 0.5, 0.0], atol=1e-15)
        assert np.allclose(bspline_basis(0.2, g), [0.18, 0.74, 0.08000000000000002, 0.0], atol=1e-15)
        assert np.allclose(
            bspline_basis(0.85, g), [0.0, 0.04500000000000001, 0.71, 0.24499999999999997], atol=1e-15
        )

    def test_matches_recursion_oracle_random(self):
        rng = np.random.default_rng(7)
        for G, k in [(3, 1), (5, 3), (8, 2)]:
            g = KnotGrid(-1.0, 1.0, G, k)
            t = g.knots().tolist()
            for x in rng.uniform(-1.3, 1.3, 20):
                expected = [cox_de_boor(i, k, float(x), t) for i in range(g.num_bases)]
                assert np.allclose(bspline_basis(float(x), g), expected, atol=1e-13)

    def test_values_within_unit_interval(self):
        g = KnotGrid(-1.0, 1.0, 6, 3)
        xs = np.random.default_rng(3).uniform(-1, 1, 200)
        b = bspline_basis(xs, g)
        assert np.all(b >= 0.0) and np.all(b <= 1.0)

    def test_local_support(self):
        g = KnotGrid(-1.0, 1.0, 5, 3)
        knots = g.knots()
        xs = np.random.default_rng(11).uniform(-1, 1, 100)
        b = bspline_basis(xs, g)
        for i in range(g.num_bases):
            outside = (xs < knots[i]) | (xs > knots[i + g.degree + 1])
            assert np.all(b[outside, i] == 0.0)

    def test_evaluates_outside_span(self):
        g = KnotGrid(-1.0, 1.0, 5, 3)
        b = bspline_basis(1.2, g)  # inside the extension
        assert b.sum() > 0
        assert np.all(bspline_basis(5.0, g) == 0.0)  # beyond the extension

    def test_non_finite_input_rejected(self):
        with pytest.raises(EvaluationError):
            bspline_basis(np.nan, KnotGrid())

    def test_derivative_matches_finite_differences(self):
        rng = np.random.default_rng(5)
        for G, k in [(5, 3), (4, 2), (3, 1)]:
            g = KnotGrid(-1.0, 1.0, G, k)
            xs = rng.uniform(-0.95, 0.95, 30)
            _, deriv = bspline_basis_and_deriv(xs, g)
            h = 1e-6
            fd = (bspline_basis(xs + h, g) - bspline_basis(xs - h, g)) / (2 * h)
            assert np.max(np.abs(deriv - fd)) < 1e-7

    def test_deterministic(self):
        g = KnotGrid(-1.0, 1.0, 5, 3)
        xs = np.random.default_rng(1).uniform(-1, 1, 50)
        assert np.array_equal(bspline_basis(xs, g), bspline_basis(xs, g))


class TestSilu:
    def test_zero(self):
        assert silu(0.0) == 0.0

    def test_saturates_to_identity(self):
        assert abs(silu(100.0) - 100.0) < 1e-12

    def test_scalar_oracle(self):
        assert abs(silu(1.0) - 1.0 / (1.0 + math.exp(-1.0))) < 1e-15

    def test_lower_bound(self):
        xs = np.linspace(-20, 20, 4001)
        assert silu(xs).min() > -0.2785

    def test_monotone_beyond_kink(self):
        xs = np.linspace(1.3, 50, 2000)
        assert np.all(np.diff(silu(xs)) > 0)

    def test_grad_matches_finite_differences(self):
        xs = np.random.default_rng(2).uniform(-5, 5, 50)
        h = 1e-6
        fd = (silu(xs + h) - silu(xs - h)) / (2 * h)
        assert np.max(np.abs(silu_grad(xs) - fd)) < 1e-9


class TestBumpBases:
    def test_grbf_center_value(self):
        b = grbf_basis(1.0, np.array([1.0]), 1.0)
        assert b.tolist() == [1.0]

    def test_grbf_unsquared_distance(self):
        # exp(-|x-c| / (2 h^2)) with the printed unsquared distance
        val = grbf_basis(0.5, np.array([0.0]), 2.0)[0]
        assert abs(val - math.exp(-0.5 / 8.0)) < 1e-15

    def test_grbf_derivative_zero_at_center(self):
        _, db = grbf_basis_and_deriv(1.0, np.array([1.0]), 1.0)
        assert db[0] == 0.0

    def test_grbf_derivative_matches_fd_away_from_center(self):
        centers = np.linspace(-1, 1, 5)
        rng = np.random.default_rng(9)
        xs = rng.uniform(-1, 1, 200)
        xs = xs[np.min(np.abs(xs[:, None] - centers), axis=1) > 1e-3]
        _, db = grbf_basis_and_deriv(xs, centers, 0.4)
        h = 1e-7
        fd = (grbf_basis(xs + h, centers, 0.4) - grbf_basis(xs - h, centers, 0.4)) / (2 * h)
        assert np.max(np.abs(db - fd)) < 1e-6

    def test_rswaf_peak(self):
        assert rswaf_basis(0.0, np.array([0.0]), 1.0).tolist() == [1.0]

    def test_rswaf_formula(self):
        val = rswaf_basis(0.7, np.array([0.2]), 0.5)[0]
        assert abs(val - (1.0 - math.tanh(1.0) ** 2)) < 1e-15

    def test_rswaf_derivative_matches_fd(self):
        centers = np.linspace(-1, 1, 4)
        xs = np.random.default_rng(4).uniform(-1.5, 1.5, 100)
        _, db = rswaf_basis_and_deriv(xs, centers, 0.6)
        h = 1e-6
        fd = (rswaf_basis(xs + h, centers, 0.6) - rswaf_basis(xs - h, centers, 0.6)) / (2 * h)
        assert np.max(np.abs(db - fd)) < 1e-8

    def test_default_centers_and_width(self):
        g = KnotGrid(-1.0, 1.0, 5, 3)
        c = uniform_centers(g)
        assert c.size == g.num_bases and c[0] == -1.0 and c[-1] == 1.0
        assert default_width(g) == g.step


class TestRefit:
    def test_same_grid_is_identity_like(self):
        g = KnotGrid(-1.0, 1.0, 5, 3)
        rng = np.random.default_rng(6)
        theta = rng.normal(size=g.num_bases)
        theta2 = refit_coefficients(theta, g, g)
        xs = np.linspace(-1, 1, 101)
        before = bspline_basis(xs, g) @ theta
        after = bspline_basis(xs, g) @ theta2
        assert np.max(np.abs(before - after)) < 1e-9

    def test_refinement_preserves_function(self):
        coarse = KnotGrid(-1.0, 1.0, 4, 3)
        fine = KnotGrid(-1.0, 1.0, 16, 3)
        rng = np.random.default_rng(8)
        theta = rng.normal(size=coarse.num_bases)
        theta2 = refit_coefficients(theta, coarse, fine)
        xs = np.linspace(-1, 1, 301)
        before = bspline_basis(xs, coarse) @ theta
        after = bspline_basis(xs, fine) @ theta2
        assert np.max(np.abs(before - after)) < 1e-6

    def test_leading_shape_preserved(self):
        g1 = KnotGrid(-1.0, 1.0, 3, 2)
        g2 = KnotGrid(-1.0, 1.0, 6, 2)
        theta = np.random.default_rng(10).normal(size=(2, 3, g1.num_bases))
        out = refit_coefficients(theta, g1, g2)
        assert out.shape == (2, 3, g2.num_bases)
