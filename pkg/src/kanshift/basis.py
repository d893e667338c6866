"""Univariate basis families evaluated on KAN edges.

Three families are supported: uniform B-splines (Cox-de Boor recursion on a
clamped-free knot vector extended ``degree`` intervals past the grid span),
Gaussian radial bumps with an unsquared distance in the exponent, and
reflectional switch functions ``1 - tanh((x - c)/h)^2``.  Everything here is a
pure function of its arguments and vectorizes over any leading input shape.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

__all__ = [
    "EvaluationError",
    "KnotGrid",
    "DEFAULT_GRID",
    "bspline_basis",
    "bspline_basis_and_deriv",
    "silu",
    "silu_grad",
    "grbf_basis",
    "grbf_basis_and_deriv",
    "rswaf_basis",
    "rswaf_basis_and_deriv",
    "uniform_centers",
    "default_width",
    "refit_coefficients",
]


class EvaluationError(ValueError):
    """Raised for non-finite inputs or malformed evaluation requests."""


@dataclass(frozen=True)
class KnotGrid:
    """Uniform knot layout for one spline edge.

    The expanded knot vector has ``grid_size + 2*degree + 1`` knots spaced
    ``(hi - lo)/grid_size`` apart, extended ``degree`` steps beyond each end,
    which yields ``grid_size + degree`` basis functions.
    """

    lo: float = -1.0
    hi: float = 1.0
    grid_size: int = 5
    degree: int = 3

    def __post_init__(self) -> None:
        if not (np.isfinite(self.lo) and np.isfinite(self.hi)) or self.lo >= self.hi:
            raise ValueError(f"knot grid needs lo < hi, got [{self.lo}, {self.hi}]")
        if int(self.grid_size) != self.grid_size or self.grid_size < 1:
            raise ValueError(f"grid_size must be a positive integer, got {self.grid_size}")
        if int(self.degree) != self.degree or self.degree < 0:
            raise ValueError(f"degree must be a non-negative integer, got {self.degree}")

    @property
    def step(self) -> float:
        return (self.hi - self.lo) / self.grid_size

    @property
    def num_bases(self) -> int:
        return self.grid_size + self.degree

    def knots(self) -> np.ndarray:
        k = self.degree
        n_knots = self.grid_size + 2 * k + 1
        return self.lo + (np.arange(n_knots) - k) * self.step


DEFAULT_GRID = KnotGrid()


def _check_finite(x: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(x)):
        raise EvaluationError(f"non-finite {what}")


def bspline_basis(x, grid: KnotGrid) -> np.ndarray:
    """All degree-k basis values at ``x``; the last axis indexes the bases.

    Inputs outside [lo, hi] are legal and evaluate on the extended knots
    (possibly to all zeros once past the extension).
    """
    x = np.asarray(x, dtype=float)
    _check_finite(x, "input to bspline_basis")
    t = grid.knots()
    xe = x[..., None]
    b = ((xe >= t[:-1]) & (xe < t[1:])).astype(float)
    for d in range(1, grid.degree + 1):
        left = (xe - t[: -d - 1]) / (t[d:-1] - t[: -d - 1]) * b[..., :-1]
        right = (t[d + 1 :] - xe) / (t[d + 1 :] - t[1:-d]) * b[..., 1:]
        b = left + right
    return b


def bspline_basis_and_deriv(x, grid: KnotGrid) -> tuple[np.ndarray, np.ndarray]:
    """Basis values and their first derivatives with respect to ``x``.

    Uses the standard degree-reduction identity; on a uniform knot vector the
    derivative is the scaled difference of adjacent degree-(k-1) bases.
    """
    x = np.asarray(x, dtype=float)
    _check_finite(x, "input to bspline_basis_and_deriv")
    k = grid.degree
    if k == 0:
        b = bspline_basis(x, grid)
        return b, np.zeros_like(b)
    t = grid.knots()
    xe = x[..., None]
    b = ((xe >= t[:-1]) & (xe < t[1:])).astype(float)
    for d in range(1, k):
        left = (xe - t[: -d - 1]) / (t[d:-1] - t[: -d - 1]) * b[..., :-1]
        right = (t[d + 1 :] - xe) / (t[d + 1 :] - t[1:-d]) * b[..., 1:]
        b = left + right
    # final step from degree k-1 to k, plus derivative from the k-1 bases
    left = (xe - t[: -k - 1]) / (t[k:-1] - t[: -k - 1]) * b[..., :-1]
    right = (t[k + 1 :] - xe) / (t[k + 1 :] - t[1 : -k]) * b[..., 1:]
    value = left + right
    deriv = (b[..., :-1] - b[..., 1:]) / grid.step
    return value, deriv


def silu(x):
    """x / (1 + exp(-x)); saturates gracefully for large |x|."""
    x = np.asarray(x, dtype=float)
    _check_finite(x, "input to silu")
    return x * expit(x)


def silu_grad(x):
    x = np.asarray(x, dtype=float)
    s = expit(x)
    return s * (1.0 + x * (1.0 - s))


def uniform_centers(grid: KnotGrid) -> np.ndarray:
    """Default bump centers: grid_size + degree uniform points on [lo, hi]."""
    return np.linspace(grid.lo, grid.hi, grid.num_bases)


def default_width(grid: KnotGrid) -> float:
    return (grid.hi - grid.lo) / grid.grid_size


def grbf_basis(x, centers: np.ndarray, width: float) -> np.ndarray:
    """exp(-|x - c_i| / (2 h^2)) with a scalar, unsquared distance."""
    x = np.asarray(x, dtype=float)
    _check_finite(x, "input to grbf_basis")
    d = np.abs(x[..., None] - centers)
    return np.exp(-d / (2.0 * width * width))


def grbf_basis_and_deriv(x, centers: np.ndarray, width: float):
    x = np.asarray(x, dtype=float)
    _check_finite(x, "input to grbf_basis_and_deriv")
    diff = x[..., None] - centers
    b = np.exp(-np.abs(diff) / (2.0 * width * width))
    # the distance kink at a center gets derivative 0 via sign(0) = 0
    db = -np.sign(diff) / (2.0 * width * width) * b
    return b, db


def rswaf_basis(x, centers: np.ndarray, width: float) -> np.ndarray:
    """1 - tanh((x - c_i)/h)^2, a smooth reflectional switch bump."""
    x = np.asarray(x, dtype=float)
    _check_finite(x, "input to rswaf_basis")
    u = (x[..., None] - centers) / width
    th = np.tanh(u)
    return 1.0 - th * th


def rswaf_basis_and_deriv(x, centers: np.ndarray, width: float):
    x = np.asarray(x, dtype=float)
    _check_finite(x, "input to rswaf_basis_and_deriv")
    u = (x[..., None] - centers) / width
    th = np.tanh(u)
    b = 1.0 - th * th
    db = -2.0 * th * b / width
    return b, db


def refit_coefficients(theta: np.ndarray, old_grid: KnotGrid, new_grid: KnotGrid) -> np.ndarray:
    """Least-squares re-fit of spline coefficients onto a new knot grid.

    The old spline is sampled at ``10 * new_grid.grid_size`` uniform points on
    the new span and the new coefficients solve the resulting linear system.
    ``theta`` may have any leading shape; the last axis holds coefficients.
    """
    if theta.shape[-1] != old_grid.num_bases:
        raise ValueError(
            f"theta has {theta.shape[-1]} coefficients, old grid expects {old_grid.num_bases}"
        )
    xs = np.linspace(new_grid.lo, new_grid.hi, 10 * new_grid.grid_size)
    a_old = bspline_basis(xs, old_grid)  # (m, nb_old)
    a_new = bspline_basis(xs, new_grid)  # (m, nb_new)
    lead = theta.shape[:-1]
    y = a_old @ theta.reshape(-1, old_grid.num_bases).T  # (m, prod(lead))
    sol, *_ = np.linalg.lstsq(a_new, y, rcond=None)
    return np.ascontiguousarray(sol.T.reshape(*lead, new_grid.num_bases))
