"""Single-edge evaluation and analytic gradients."""

import numpy as np
import pytest

from conftest import rel_err
from kanshift.basis import KnotGrid, silu, uniform_centers
from kanshift.edges import (
    KIND_BSPLINE,
    KIND_GRBF,
    KIND_RSWAF,
    EdgeFunction,
    edge_eval,
    edge_grad,
    make_edge,
)

GRID = KnotGrid(-1.0, 1.0, 5, 3)


def fd_partials(edge, x, h=1e-5):
    """Central finite differences for every learnable and the input."""
    def with_theta(theta):
        return EdgeFunction(edge.kind, theta, alpha=edge.alpha, beta=edge.beta, grid=edge.grid,
                            centers=edge.centers, width=edge.width)

    d_theta = np.empty_like(edge.theta)
    for i in range(edge.theta.size):
        tp = edge.theta.copy(); tp[i] += h
        tm = edge.theta.copy(); tm[i] -= h
        d_theta[i] = (edge_eval(with_theta(tp), x) - edge_eval(with_theta(tm), x)) / (2 * h)
    d_x = (edge_eval(edge, x + h) - edge_eval(edge, x - h)) / (2 * h)
    if edge.kind == KIND_BSPLINE:
        ep = EdgeFunction(edge.kind, edge.theta, alpha=edge.alpha + h, beta=edge.beta, grid=edge.grid)
        em = EdgeFunction(edge.kind, edge.theta, alpha=edge.alpha - h, beta=edge.beta, grid=edge.grid)
        d_alpha = (edge_eval(ep, x) - edge_eval(em, x)) / (2 * h)
        ep = EdgeFunction(edge.kind, edge.theta, alpha=edge.alpha, beta=edge.beta + h, grid=edge.grid)
        em = EdgeFunction(edge.kind, edge.theta, alpha=edge.alpha, beta=edge.beta - h, grid=edge.grid)
        d_beta = (edge_eval(ep, x) - edge_eval(em, x)) / (2 * h)
    else:
        d_alpha = d_beta = 0.0
    return d_x, d_theta, d_alpha, d_beta


class TestEdgeEval:
    def test_bspline_zero_theta_reduces_to_silu(self):
        edge = EdgeFunction(KIND_BSPLINE, np.zeros(GRID.num_bases), alpha=3.7, beta=1.0, grid=GRID)
        xs = np.linspace(-2, 2, 9)
        assert np.array_equal(edge_eval(edge, xs), silu(xs))

    def test_rswaf_peak(self):
        edge = EdgeFunction(KIND_RSWAF, [1.0], grid=GRID, centers=[0.0], width=1.0)
        assert edge_eval(edge, 0.0) == 1.0

    def test_grbf_center(self):
        edge = EdgeFunction(KIND_GRBF, [2.0], grid=GRID, centers=[1.0], width=1.0)
        assert edge_eval(edge, 1.0) == 2.0

    def test_deterministic_bit_identical(self):
        rng = np.random.default_rng(0)
        for kind in (KIND_BSPLINE, KIND_GRBF, KIND_RSWAF):
            edge = make_edge(kind, GRID, rng)
            xs = rng.uniform(-1, 1, 32)
            assert np.array_equal(edge_eval(edge, xs), edge_eval(edge, xs))


class TestEdgeGrad:
    def test_bspline_theta_grad_is_scaled_basis(self):
        rng = np.random.default_rng(1)
        edge = make_edge(KIND_BSPLINE, GRID, rng)
        edge.alpha = 2.5
        from kanshift.basis import bspline_basis

        g = edge_grad(edge, 0.3)
        assert np.allclose(g.d_theta, 2.5 * bspline_basis(0.3, GRID), atol=0, rtol=0)

    @pytest.mark.parametrize("kind", [KIND_BSPLINE, KIND_GRBF, KIND_RSWAF])
    def test_partials_match_finite_differences(self, kind):
        rng = np.random.default_rng(17)
        edge = make_edge(kind, GRID, rng)
        centers = uniform_centers(GRID)
        count = 0
        while count < 100:
            x = float(rng.uniform(-1.1, 1.1))
            if kind == KIND_GRBF and np.min(np.abs(x - centers)) < 1e-3:
                continue
            count += 1
            g = edge_grad(edge, x)
            d_x, d_theta, d_alpha, d_beta = fd_partials(edge, x)
            assert rel_err(g.d_x, d_x) < 1e-5
            assert np.max(rel_err(g.d_theta, d_theta)) < 1e-5
            assert rel_err(g.d_alpha, d_alpha) < 1e-5
            assert rel_err(g.d_beta, d_beta) < 1e-5


class TestEdgeInvariants:
    def test_bspline_theta_length_checked(self):
        with pytest.raises(ValueError, match="coefficients"):
            EdgeFunction(KIND_BSPLINE, np.zeros(3), grid=GRID)

    def test_bump_theta_must_match_centers(self):
        with pytest.raises(ValueError, match="coefficients"):
            EdgeFunction(KIND_GRBF, [1.0, 2.0], grid=GRID, centers=[0.0], width=1.0)

    def test_width_positive(self):
        with pytest.raises(ValueError, match="width"):
            EdgeFunction(KIND_RSWAF, [1.0], grid=GRID, centers=[0.0], width=0.0)

    def test_bump_variants_have_fixed_residual(self):
        with pytest.raises(ValueError, match="fixed"):
            EdgeFunction(KIND_GRBF, [1.0], alpha=2.0, beta=0.0, grid=GRID, centers=[0.0], width=1.0)

    def test_finite_parameters_required(self):
        with pytest.raises(ValueError, match="finite"):
            EdgeFunction(KIND_BSPLINE, np.full(GRID.num_bases, np.inf), grid=GRID)

    def test_default_centers_fill_in(self):
        edge = EdgeFunction(KIND_RSWAF, np.zeros(GRID.num_bases), grid=GRID)
        assert edge.centers.size == GRID.num_bases
        assert edge.width == GRID.step
