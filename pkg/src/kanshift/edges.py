"""Single learnable edge activations and their analytic derivatives.

An edge carries one univariate function of one of three kinds:

* ``bspline`` -- beta * silu(x) + alpha * sum_i theta_i B_i(x)
* ``grbf``    -- sum_i theta_i exp(-|x - c_i| / (2 h^2))
* ``rswaf``   -- sum_i theta_i (1 - tanh((x - c_i)/h)^2)

The bump variants have no residual term, so their alpha/beta are fixed to
1 and 0 and are not learnable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .basis import (
    DEFAULT_GRID,
    KnotGrid,
    bspline_basis,
    bspline_basis_and_deriv,
    default_width,
    grbf_basis,
    grbf_basis_and_deriv,
    rswaf_basis,
    rswaf_basis_and_deriv,
    silu,
    silu_grad,
    uniform_centers,
)

KIND_BSPLINE = "bspline"
KIND_GRBF = "grbf"
KIND_RSWAF = "rswaf"
EDGE_KINDS = (KIND_BSPLINE, KIND_GRBF, KIND_RSWAF)

__all__ = [
    "KIND_BSPLINE",
    "KIND_GRBF",
    "KIND_RSWAF",
    "EDGE_KINDS",
    "EdgeFunction",
    "EdgeGradients",
    "edge_eval",
    "edge_grad",
    "make_edge",
]


@dataclass
class EdgeFunction:
    """One learnable activation on a network edge."""

    kind: str
    theta: np.ndarray
    alpha: float = 1.0
    beta: float = 0.0
    grid: KnotGrid = field(default_factory=lambda: DEFAULT_GRID)
    centers: np.ndarray | None = None
    width: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in EDGE_KINDS:
            raise ValueError(f"unknown edge kind {self.kind!r}")
        self.theta = np.asarray(self.theta, dtype=float)
        if self.theta.ndim != 1:
            raise ValueError("theta must be a 1-d coefficient vector")
        if self.kind == KIND_BSPLINE:
            if self.theta.size != self.grid.num_bases:
                raise ValueError(
                    f"bspline edge needs {self.grid.num_bases} coefficients, got {self.theta.size}"
                )
        else:
            if self.centers is None:
                self.centers = uniform_centers(self.grid)
            self.centers = np.asarray(self.centers, dtype=float)
            if self.width is None:
                self.width = default_width(self.grid)
            if self.theta.size != self.centers.size:
                raise ValueError(
                    f"{self.kind} edge needs {self.centers.size} coefficients, got {self.theta.size}"
                )
            if not self.width > 0:
                raise ValueError(f"width must be positive, got {self.width}")
            # the bump variants carry no residual term
            if self.alpha != 1.0 or self.beta != 0.0:
                raise ValueError(f"{self.kind} edge has fixed alpha=1, beta=0")
        params = [self.theta, self.alpha, self.beta]
        if self.centers is not None:
            params.append(self.centers)
        if self.width is not None:
            params.append(self.width)
        for p in params:
            if not np.all(np.isfinite(p)):
                raise ValueError("edge parameters must be finite")


@dataclass
class EdgeGradients:
    """Partial derivatives of edge_eval w.r.t. input and learnables."""

    d_x: float | np.ndarray
    d_theta: np.ndarray
    d_alpha: float | np.ndarray
    d_beta: float | np.ndarray


def edge_eval(edge: EdgeFunction, x):
    """Evaluate the edge at ``x`` (scalar or any array shape)."""
    if edge.kind == KIND_BSPLINE:
        b = bspline_basis(x, edge.grid)
        return edge.beta * silu(x) + edge.alpha * (b @ edge.theta)
    if edge.kind == KIND_GRBF:
        return grbf_basis(x, edge.centers, edge.width) @ edge.theta
    return rswaf_basis(x, edge.centers, edge.width) @ edge.theta


def edge_grad(edge: EdgeFunction, x) -> EdgeGradients:
    """Analytic partials of edge_eval w.r.t. x, theta, alpha, and beta."""
    if edge.kind == KIND_BSPLINE:
        b, db = bspline_basis_and_deriv(x, edge.grid)
        d_x = edge.beta * silu_grad(x) + edge.alpha * (db @ edge.theta)
        return EdgeGradients(
            d_x=d_x,
            d_theta=edge.alpha * b,
            d_alpha=b @ edge.theta,
            d_beta=silu(x),
        )
    if edge.kind == KIND_GRBF:
        b, db = grbf_basis_and_deriv(x, edge.centers, edge.width)
    else:
        b, db = rswaf_basis_and_deriv(x, edge.centers, edge.width)
    zero = np.zeros(np.shape(x))
    return EdgeGradients(d_x=db @ edge.theta, d_theta=b, d_alpha=zero, d_beta=zero)


def make_edge(kind: str, grid: KnotGrid = DEFAULT_GRID, rng: np.random.Generator | None = None) -> EdgeFunction:
    """Fresh edge with theta ~ N(0, 0.1/sqrt(num_bases)) around the residual."""
    rng = rng if rng is not None else np.random.default_rng()
    nb = grid.num_bases
    theta = rng.normal(0.0, 0.1 / np.sqrt(nb), size=nb)
    if kind == KIND_BSPLINE:
        return EdgeFunction(kind, theta, alpha=1.0, beta=1.0, grid=grid)
    return EdgeFunction(kind, theta, grid=grid)
