"""KAN layers, networks, reverse-mode gradients, and checkpoint round trips.

A layer is an n_out x n_in matrix of edge activations applied to the input
vector and summed at each output node.  Layers store their coefficients as
dense arrays (all edges of one layer share the knot grid / centers / width)
so forward and backward passes vectorize over batches; ``layer.edge(j, i)``
materializes the scalar view of a single connection when needed.
"""

from __future__ import annotations

import json

import numpy as np

from .basis import (
    DEFAULT_GRID,
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
from .edges import EDGE_KINDS, KIND_BSPLINE, EdgeFunction
from .jsonio import canonical_json

__all__ = [
    "CheckpointError",
    "KanLayer",
    "KanNetwork",
    "ParameterTape",
    "layer_forward",
    "network_forward",
    "network_backward",
    "save_network",
    "load_network",
]

CHECKPOINT_VERSION = 1
THETA_INIT_SCALE = 0.1


class CheckpointError(ValueError):
    """Malformed or version-mismatched checkpoint; message carries the field path."""


class KanLayer:
    """One edge-function matrix mapping n_in inputs to n_out node sums."""

    def __init__(
        self,
        n_in: int,
        n_out: int,
        kind: str = KIND_BSPLINE,
        grid: KnotGrid = DEFAULT_GRID,
        centers: np.ndarray | None = None,
        width: float | None = None,
        rng: np.random.Generator | None = None,
    ):
        if kind not in EDGE_KINDS:
            raise ValueError(f"unknown edge kind {kind!r}")
        if n_in < 1 or n_out < 1:
            raise ValueError("layer widths must be positive")
        self.n_in = int(n_in)
        self.n_out = int(n_out)
        self.kind = kind
        self.grid = grid
        if kind == KIND_BSPLINE:
            self.centers = None
            self.width = None
        else:
            self.centers = np.asarray(centers if centers is not None else uniform_centers(grid), dtype=float)
            self.width = float(width if width is not None else default_width(grid))
        nb = self.num_bases
        rng = rng if rng is not None else np.random.default_rng()
        self.theta = rng.normal(0.0, THETA_INIT_SCALE / np.sqrt(nb), size=(n_out, n_in, nb))
        if kind == KIND_BSPLINE:
            self.alpha = np.ones((n_out, n_in))
            self.beta = np.ones((n_out, n_in))
        else:
            self.alpha = None
            self.beta = None

    @property
    def num_bases(self) -> int:
        return self.grid.num_bases if self.kind == KIND_BSPLINE else self.centers.size

    # ---- basis dispatch -------------------------------------------------

    def _basis(self, x: np.ndarray) -> np.ndarray:
        if self.kind == KIND_BSPLINE:
            return bspline_basis(x, self.grid)
        if self.kind == "grbf":
            return grbf_basis(x, self.centers, self.width)
        return rswaf_basis(x, self.centers, self.width)

    def _basis_and_deriv(self, x: np.ndarray):
        if self.kind == KIND_BSPLINE:
            return bspline_basis_and_deriv(x, self.grid)
        if self.kind == "grbf":
            return grbf_basis_and_deriv(x, self.centers, self.width)
        return rswaf_basis_and_deriv(x, self.centers, self.width)

    # ---- evaluation ------------------------------------------------------

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Batch node sums: x (batch, n_in) -> (batch, n_out)."""
        x = np.asarray(x, dtype=float)
        if x.ndim != 2 or x.shape[1] != self.n_in:
            raise ValueError(f"layer expects (batch, {self.n_in}) inputs, got {x.shape}")
        b = self._basis(x)  # (batch, n_in, nb)
        if self.kind == KIND_BSPLINE:
            y = np.einsum("ois,bis->bo", self.theta * self.alpha[..., None], b)
            y += silu(x) @ self.beta.T
        else:
            y = np.einsum("ois,bis->bo", self.theta, b)
        return y

    def forward_cached(self, x: np.ndarray):
        y = self.forward(x)
        return y, x

    def backward(self, x: np.ndarray, d_y: np.ndarray):
        """Gradients for upstream d_y (batch, n_out): returns (d_x, grad arrays)."""
        b, db = self._basis_and_deriv(x)
        if self.kind == KIND_BSPLINE:
            scaled = self.theta * self.alpha[..., None]
            d_theta = np.einsum("bo,bis->ois", d_y, b) * self.alpha[..., None]
            d_alpha = np.einsum("bo,ois,bis->oi", d_y, self.theta, b)
            d_beta = d_y.T @ silu(x)
            d_x = np.einsum("bo,ois,bis->bi", d_y, scaled, db)
            d_x += (d_y @ self.beta) * silu_grad(x)
            return d_x, [d_theta, d_alpha, d_beta]
        d_theta = np.einsum("bo,bis->ois", d_y, b)
        d_x = np.einsum("bo,ois,bis->bi", d_y, self.theta, db)
        return d_x, [d_theta]

    # ---- parameters and single-edge views ---------------------------------

    def param_arrays(self) -> list[tuple[str, np.ndarray]]:
        if self.kind == KIND_BSPLINE:
            return [("theta", self.theta), ("alpha", self.alpha), ("beta", self.beta)]
        return [("theta", self.theta)]

    def edge(self, j: int, i: int) -> EdgeFunction:
        """Scalar-level view of the edge from input neuron i to output neuron j."""
        if self.kind == KIND_BSPLINE:
            return EdgeFunction(
                self.kind,
                self.theta[j, i].copy(),
                alpha=float(self.alpha[j, i]),
                beta=float(self.beta[j, i]),
                grid=self.grid,
            )
        return EdgeFunction(
            self.kind,
            self.theta[j, i].copy(),
            alpha=1.0,
            beta=0.0,
            grid=self.grid,
            centers=self.centers.copy(),
            width=self.width,
        )

    @classmethod
    def from_edges(cls, edges: list[list[EdgeFunction]]) -> "KanLayer":
        """Build a layer from an n_out x n_in matrix of compatible edges.

        All edges must share kind, grid, centers, and width; only the
        coefficients may differ.
        """
        n_out = len(edges)
        n_in = len(edges[0])
        first = edges[0][0]
        layer = cls.__new__(cls)
        layer.n_in = n_in
        layer.n_out = n_out
        layer.kind = first.kind
        layer.grid = first.grid
        layer.centers = None if first.centers is None else np.asarray(first.centers, dtype=float)
        layer.width = first.width
        nb = first.theta.size
        layer.theta = np.zeros((n_out, n_in, nb))
        if first.kind == KIND_BSPLINE:
            layer.alpha = np.zeros((n_out, n_in))
            layer.beta = np.zeros((n_out, n_in))
        else:
            layer.alpha = None
            layer.beta = None
        for j, row in enumerate(edges):
            if len(row) != n_in:
                raise ValueError("ragged edge matrix")
            for i, e in enumerate(row):
                if e.kind != first.kind or e.grid != first.grid:
                    raise ValueError("edges within a layer must share kind and grid")
                if (e.centers is None) != (first.centers is None) or (
                    e.centers is not None
                    and (e.width != first.width or not np.array_equal(e.centers, first.centers))
                ):
                    raise ValueError("edges within a layer must share centers and width")
                layer.theta[j, i] = e.theta
                if first.kind == KIND_BSPLINE:
                    layer.alpha[j, i] = e.alpha
                    layer.beta[j, i] = e.beta
        return layer

    def refit_grid(self, new_grid: KnotGrid) -> None:
        """Re-fit coefficients onto a new knot grid by least squares."""
        if self.kind != KIND_BSPLINE:
            raise ValueError("grid refit applies to bspline layers")
        self.theta = refit_coefficients(self.theta, self.grid, new_grid)
        self.grid = new_grid

    # ---- serialization ----------------------------------------------------

    def to_dict(self) -> dict:
        edges = []
        for j in range(self.n_out):
            for i in range(self.n_in):
                edges.append(
                    {
                        "kind": self.kind,
                        "theta": self.theta[j, i].tolist(),
                        "alpha": float(self.alpha[j, i]) if self.kind == KIND_BSPLINE else 1.0,
                        "beta": float(self.beta[j, i]) if self.kind == KIND_BSPLINE else 0.0,
                        "grid": {
                            "lo": self.grid.lo,
                            "hi": self.grid.hi,
                            "G": self.grid.grid_size,
                            "k": self.grid.degree,
                        },
                        "centers": None if self.centers is None else self.centers.tolist(),
                        "width": self.width,
                    }
                )
        return {"edges": edges}


class KanNetwork:
    """Stacked KAN layers with a per-feature affine input map."""

    def __init__(self, layers: list[KanLayer], input_shift=None, input_scale=None):
        if not layers:
            raise ValueError("network needs at least one layer")
        for a, b in zip(layers, layers[1:]):
            if a.n_out != b.n_in:
                raise ValueError(f"layer widths do not chain: {a.n_out} -> {b.n_in}")
        self.layers = layers
        n0 = layers[0].n_in
        self.input_shift = np.zeros(n0) if input_shift is None else np.asarray(input_shift, dtype=float)
        self.input_scale = np.ones(n0) if input_scale is None else np.asarray(input_scale, dtype=float)
        if self.input_shift.shape != (n0,) or self.input_scale.shape != (n0,):
            raise ValueError("input norm arrays must match the input width")

    @classmethod
    def build(
        cls,
        widths: list[int],
        kind: str = KIND_BSPLINE,
        grid_size: int = 5,
        degree: int = 3,
        grid_range: tuple[float, float] = (-1.0, 1.0),
        hidden_grid_range: tuple[float, float] | None = None,
        seed: int = 0,
    ) -> "KanNetwork":
        """Fresh network with the given widths.

        ``grid_range`` covers layer 0 (normalized inputs); hidden layers see
        node sums that can exceed it, so they default to a span widened by
        their fan-in.
        """
        if len(widths) < 2:
            raise ValueError("need at least input and output widths")
        rng = np.random.default_rng(seed)
        layers = []
        for l, (n_in, n_out) in enumerate(zip(widths, widths[1:])):
            if l == 0:
                lo, hi = grid_range
            elif hidden_grid_range is not None:
                lo, hi = hidden_grid_range
            else:
                half = max(1.0, float(widths[l - 1] if l else 1))
                lo, hi = -half, half
            grid = KnotGrid(lo, hi, grid_size, degree)
            layers.append(KanLayer(n_in, n_out, kind=kind, grid=grid, rng=rng))
        return cls(layers)

    # ---- shape metadata ---------------------------------------------------

    @property
    def widths(self) -> list[int]:
        return [self.layers[0].n_in] + [layer.n_out for layer in self.layers]

    @property
    def n_in(self) -> int:
        return self.layers[0].n_in

    def set_input_norm_from_data(self, x: np.ndarray) -> None:
        """Fit the per-feature affine map from data min/max onto [-1, 1]."""
        x = np.asarray(x, dtype=float)
        lo = x.min(axis=0)
        hi = x.max(axis=0)
        span = hi - lo
        shift = 0.5 * (lo + hi)
        scale = np.where(span > 0, 2.0 / np.where(span > 0, span, 1.0), 1.0)
        self.input_shift = shift
        self.input_scale = scale

    # ---- evaluation ---------------------------------------------------------

    def _normalize(self, x: np.ndarray) -> np.ndarray:
        return (x - self.input_shift) * self.input_scale

    def forward_batch(self, x: np.ndarray) -> np.ndarray:
        """Scalar outputs for a batch: x (batch, n_0) -> (batch,)."""
        y = self._forward_layers(x)
        if y.shape[1] != 1:
            raise ValueError(f"scalar output expects final width 1, got {y.shape[1]}")
        return y[:, 0]

    def predict(self, x: np.ndarray) -> np.ndarray:
        return self.forward_batch(x)

    def _forward_layers(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim != 2 or x.shape[1] != self.n_in:
            raise ValueError(f"network expects (batch, {self.n_in}) inputs, got {x.shape}")
        h = self._normalize(x)
        for l, layer in enumerate(self.layers):
            h = layer.forward(h)
            if not np.all(np.isfinite(h)):
                raise EvaluationError(f"non-finite activation after layer {l}")
        return h

    def grad_batch(self, x: np.ndarray, upstream: np.ndarray):
        """Tape-ordered gradient of sum_b upstream_b * output_b, plus d/dx.

        Returns (grad_vector, d_x) where d_x is w.r.t. the raw (pre-norm)
        inputs.
        """
        x = np.asarray(x, dtype=float)
        upstream = np.asarray(upstream, dtype=float)
        if x.ndim != 2 or x.shape[1] != self.n_in:
            raise ValueError(f"network expects (batch, {self.n_in}) inputs, got {x.shape}")
        if upstream.shape != (x.shape[0],):
            raise ValueError("upstream must be one scalar per batch row")
        acts = [self._normalize(x)]
        for l, layer in enumerate(self.layers):
            h = layer.forward(acts[-1])
            if not np.all(np.isfinite(h)):
                raise EvaluationError(f"non-finite activation after layer {l}")
            acts.append(h)
        if acts[-1].shape[1] != 1:
            raise ValueError("gradient pass expects final width 1")
        d_h = upstream[:, None]
        grads: list[np.ndarray | None] = [None] * len(self.layers)
        for l in range(len(self.layers) - 1, -1, -1):
            d_h, layer_grads = self.layers[l].backward(acts[l], d_h)
            grads[l] = np.concatenate([g.ravel() for g in layer_grads])
        d_x = d_h * self.input_scale
        return np.concatenate(grads), d_x

    # ---- parameter plumbing -------------------------------------------------

    def param_arrays(self) -> list[tuple[str, np.ndarray]]:
        out = []
        for l, layer in enumerate(self.layers):
            for name, arr in layer.param_arrays():
                out.append((f"layers[{l}].{name}", arr))
        return out

    def reg_array_names(self) -> tuple[str, ...]:
        # spline coefficients only; alpha/beta stay out of the regularizer
        return ("theta",)

    def copy(self) -> "KanNetwork":
        return load_network(save_network(self))

    def refine_grid(self, new_grid_size: int) -> None:
        """Change every bspline layer's grid size, re-fitting coefficients."""
        for layer in self.layers:
            g = layer.grid
            layer.refit_grid(KnotGrid(g.lo, g.hi, new_grid_size, g.degree))

    # ---- serialization --------------------------------------------------------

    def to_checkpoint_dict(self) -> dict:
        return {
            "format_version": CHECKPOINT_VERSION,
            "model": "kan",
            "widths": self.widths,
            "input_norm": {
                "shift": self.input_shift.tolist(),
                "scale": self.input_scale.tolist(),
            },
            "layers": [layer.to_dict() for layer in self.layers],
        }

    @classmethod
    def from_checkpoint_dict(cls, doc: dict) -> "KanNetwork":
        widths = _field(doc, "widths", list)
        if len(widths) < 2 or any(int(w) < 1 for w in widths):
            raise CheckpointError("widths: need at least two positive entries")
        norm = _field(doc, "input_norm", dict)
        shift = np.asarray(_field(norm, "shift", list, "input_norm"), dtype=float)
        scale = np.asarray(_field(norm, "scale", list, "input_norm"), dtype=float)
        layer_docs = _field(doc, "layers", list)
        if len(layer_docs) != len(widths) - 1:
            raise CheckpointError(f"layers: expected {len(widths) - 1} entries, got {len(layer_docs)}")
        layers = []
        for l, ldoc in enumerate(layer_docs):
            layers.append(_layer_from_dict(ldoc, int(widths[l]), int(widths[l + 1]), f"layers[{l}]"))
        try:
            return cls(layers, input_shift=shift, input_scale=scale)
        except ValueError as exc:
            raise CheckpointError(str(exc)) from exc


def _field(doc: dict, name: str, typ, prefix: str = ""):
    path = f"{prefix}.{name}" if prefix else name
    if not isinstance(doc, dict) or name not in doc:
        raise CheckpointError(f"{path}: missing field")
    val = doc[name]
    if typ is float and isinstance(val, (int, float)) and not isinstance(val, bool):
        return float(val)
    if not isinstance(val, typ) or isinstance(val, bool):
        raise CheckpointError(f"{path}: expected {typ.__name__}")
    return val


def _edge_from_dict(doc: dict, path: str) -> EdgeFunction:
    kind = _field(doc, "kind", str, path)
    if kind not in EDGE_KINDS:
        raise CheckpointError(f"{path}.kind: unknown kind {kind!r}")
    gdoc = _field(doc, "grid", dict, path)
    try:
        grid = KnotGrid(
            lo=_field(gdoc, "lo", float, f"{path}.grid"),
            hi=_field(gdoc, "hi", float, f"{path}.grid"),
            grid_size=int(_field(gdoc, "G", int, f"{path}.grid")),
            degree=int(_field(gdoc, "k", int, f"{path}.grid")),
        )
    except ValueError as exc:
        raise CheckpointError(f"{path}.grid: {exc}") from exc
    theta = np.asarray(_field(doc, "theta", list, path), dtype=float)
    alpha = _field(doc, "alpha", float, path)
    beta = _field(doc, "beta", float, path)
    centers = doc.get("centers")
    width = doc.get("width")
    try:
        return EdgeFunction(
            kind,
            theta,
            alpha=alpha,
            beta=beta,
            grid=grid,
            centers=None if centers is None else np.asarray(centers, dtype=float),
            width=None if width is None else float(width),
        )
    except ValueError as exc:
        raise CheckpointError(f"{path}: {exc}") from exc


def _layer_from_dict(doc: dict, n_in: int, n_out: int, path: str) -> KanLayer:
    edge_docs = _field(doc, "edges", list, path)
    if len(edge_docs) != n_in * n_out:
        raise CheckpointError(f"{path}.edges: expected {n_in * n_out} edges, got {len(edge_docs)}")
    edges = []
    for j in range(n_out):
        row = []
        for i in range(n_in):
            row.append(_edge_from_dict(edge_docs[j * n_in + i], f"{path}.edges[{j * n_in + i}]"))
        edges.append(row)
    try:
        return KanLayer.from_edges(edges)
    except ValueError as exc:
        raise CheckpointError(f"{path}: {exc}") from exc


class ParameterTape:
    """Flat, stably-indexed view over every learnable scalar of a model."""

    def __init__(self, model):
        self._entries = []
        offset = 0
        for name, arr in model.param_arrays():
            size = arr.size
            self._entries.append((name, arr, slice(offset, offset + size)))
            offset += size
        self.length = offset

    def __len__(self) -> int:
        return self.length

    def read(self) -> np.ndarray:
        out = np.empty(self.length)
        for _, arr, sl in self._entries:
            out[sl] = arr.ravel()
        return out

    def write(self, vec: np.ndarray) -> None:
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (self.length,):
            raise ValueError(f"tape expects {self.length} scalars, got {vec.shape}")
        for _, arr, sl in self._entries:
            arr[...] = vec[sl].reshape(arr.shape)

    def mask_for(self, suffixes: tuple[str, ...]) -> np.ndarray:
        """Boolean mask selecting entries whose array name ends in a suffix."""
        mask = np.zeros(self.length, dtype=bool)
        for name, _, sl in self._entries:
            leaf = name.rsplit(".", 1)[-1]
            if leaf in suffixes:
                mask[sl] = True
        return mask


# ---- spec-surface wrappers -----------------------------------------------


def layer_forward(layer: KanLayer, x) -> np.ndarray:
    """Node sums for one input vector: output_j = sum_i edge_ji(x_i)."""
    x = np.asarray(x, dtype=float)
    if x.shape != (layer.n_in,):
        raise ValueError(f"layer expects {layer.n_in} inputs, got shape {x.shape}")
    return layer.forward(x[None, :])[0]


def network_forward(net: KanNetwork, x_in) -> float:
    """Composed layer maps applied to one input vector; scalar output."""
    x = np.asarray(x_in, dtype=float)
    if x.shape != (net.n_in,):
        raise ValueError(f"network expects {net.n_in} inputs, got shape {x.shape}")
    return float(net.forward_batch(x[None, :])[0])


def network_backward(net: KanNetwork, x_in, upstream: float = 1.0):
    """Gradient of upstream * output w.r.t. every learnable and the input."""
    x = np.asarray(x_in, dtype=float)
    grad, d_x = net.grad_batch(x[None, :], np.asarray([upstream], dtype=float))
    return grad, d_x[0]


def save_network(net: KanNetwork) -> bytes:
    return (canonical_json(net.to_checkpoint_dict()) + "\n").encode("utf-8")


def load_network(data: bytes | str) -> KanNetwork:
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise CheckpointError("checkpoint root must be an object")
    version = doc.get("format_version")
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"format_version: expected {CHECKPOINT_VERSION}, got {version!r}")
    model = doc.get("model", "kan")
    if model != "kan":
        raise CheckpointError(f"model: expected 'kan', got {model!r}")
    return KanNetwork.from_checkpoint_dict(doc)
