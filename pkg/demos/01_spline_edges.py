"""Learnable edge activations: B-spline + SiLU residual, GRBF, and RSWAF.

Every connection in the network carries its own trainable univariate
function.  This script shows what those functions look like: the underlying
basis families, a randomly initialized edge of each kind, and the effect of
re-fitting a spline edge onto a finer knot grid.

Run from the repository root:  python3 demos/01_spline_edges.py
Figures land in demos/output/.
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from kanshift.basis import (
    KnotGrid,
    bspline_basis,
    grbf_basis,
    refit_coefficients,
    rswaf_basis,
    silu,
    uniform_centers,
)
from kanshift.edges import KIND_BSPLINE, KIND_GRBF, KIND_RSWAF, edge_eval, make_edge

OUT = Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

grid = KnotGrid(lo=-1.0, hi=1.0, grid_size=5, degree=3)
xs = np.linspace(-1.2, 1.2, 601)

fig, axes = plt.subplots(2, 2, figsize=(11, 7))

# the three basis families share the same count: grid_size + degree functions
axes[0, 0].plot(xs, bspline_basis(xs, grid))
axes[0, 0].set_title(f"cubic B-spline bases (G={grid.grid_size}, {grid.num_bases} functions)")

centers = uniform_centers(grid)
width = grid.step
axes[0, 1].plot(xs, grbf_basis(xs, centers, width))
axes[0, 1].set_title("Gaussian radial bumps, unsquared distance")

axes[1, 0].plot(xs, rswaf_basis(xs, centers, width))
axes[1, 0].set_title(r"reflectional switches $1-\tanh^2((x-c)/h)$")

rng = np.random.default_rng(7)
for kind, label in [(KIND_BSPLINE, "spline + SiLU residual"), (KIND_GRBF, "GRBF"), (KIND_RSWAF, "RSWAF")]:
    edge = make_edge(kind, grid, rng)
    axes[1, 1].plot(xs, edge_eval(edge, xs), label=label)
axes[1, 1].plot(xs, silu(xs), "k--", lw=1, label="SiLU alone")
axes[1, 1].legend(fontsize=8)
axes[1, 1].set_title("randomly initialized edges of each kind")

fig.tight_layout()
fig.savefig(OUT / "edge_families.png", dpi=120)
print(f"wrote {OUT / 'edge_families.png'}")

# grid refinement: the same function re-expressed on a finer knot vector
coarse = KnotGrid(-1.0, 1.0, 4, 3)
fine = KnotGrid(-1.0, 1.0, 16, 3)
theta = rng.normal(size=coarse.num_bases)
theta_fine = refit_coefficients(theta, coarse, fine)
xs_in = np.linspace(-1, 1, 401)
err = np.abs(bspline_basis(xs_in, coarse) @ theta - bspline_basis(xs_in, fine) @ theta_fine)
print(f"refit G=4 -> G=16: max reproduction error {err.max():.2e} (least-squares re-fit)")
