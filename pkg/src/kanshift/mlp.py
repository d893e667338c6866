"""Fixed tanh MLP baseline sharing the KAN training and checkpoint plumbing."""

from __future__ import annotations

import json

import numpy as np

from .network import CHECKPOINT_VERSION, CheckpointError, _field
from .jsonio import canonical_json

__all__ = ["MlpNetwork", "save_mlp", "load_mlp"]


class MlpNetwork:
    """Two-hidden-layer tanh regressor with a linear scalar output."""

    def __init__(self, weights, biases, input_shift=None, input_scale=None):
        self.weights = [np.asarray(w, dtype=float) for w in weights]
        self.biases = [np.asarray(b, dtype=float) for b in biases]
        for w, b in zip(self.weights, self.biases):
            if w.ndim != 2 or b.shape != (w.shape[0],):
                raise ValueError("weight/bias shapes do not match")
        for a, b in zip(self.weights, self.weights[1:]):
            if b.shape[1] != a.shape[0]:
                raise ValueError("layer widths do not chain")
        if self.weights[-1].shape[0] != 1:
            raise ValueError("output layer must have width 1")
        n0 = self.weights[0].shape[1]
        self.input_shift = np.zeros(n0) if input_shift is None else np.asarray(input_shift, dtype=float)
        self.input_scale = np.ones(n0) if input_scale is None else np.asarray(input_scale, dtype=float)

    @classmethod
    def build(cls, n_in: int, hidden: tuple[int, int] = (16, 16), seed: int = 0) -> "MlpNetwork":
        rng = np.random.default_rng(seed)
        widths = [n_in, *hidden, 1]
        weights = []
        biases = []
        for a, b in zip(widths, widths[1:]):
            weights.append(rng.normal(0.0, 1.0 / np.sqrt(a), size=(b, a)))
            biases.append(np.zeros(b))
        return cls(weights, biases)

    @property
    def widths(self) -> list[int]:
        return [self.weights[0].shape[1]] + [w.shape[0] for w in self.weights]

    @property
    def n_in(self) -> int:
        return self.weights[0].shape[1]

    def set_input_norm_from_data(self, x: np.ndarray) -> None:
        x = np.asarray(x, dtype=float)
        lo = x.min(axis=0)
        hi = x.max(axis=0)
        span = hi - lo
        self.input_shift = 0.5 * (lo + hi)
        self.input_scale = np.where(span > 0, 2.0 / np.where(span > 0, span, 1.0), 1.0)

    def _forward_cached(self, x: np.ndarray):
        x = np.asarray(x, dtype=float)
        if x.ndim != 2 or x.shape[1] != self.n_in:
            raise ValueError(f"mlp expects (batch, {self.n_in}) inputs, got {x.shape}")
        h = (x - self.input_shift) * self.input_scale
        acts = [h]
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            h = np.tanh(h @ w.T + b)
            acts.append(h)
        out = h @ self.weights[-1].T + self.biases[-1]
        return out, acts

    def forward_batch(self, x: np.ndarray) -> np.ndarray:
        out, _ = self._forward_cached(x)
        return out[:, 0]

    def predict(self, x: np.ndarray) -> np.ndarray:
        return self.forward_batch(x)

    def grad_batch(self, x: np.ndarray, upstream: np.ndarray):
        upstream = np.asarray(upstream, dtype=float)
        out, acts = self._forward_cached(x)
        if upstream.shape != (out.shape[0],):
            raise ValueError("upstream must be one scalar per batch row")
        d_h = upstream[:, None]
        grads: list[np.ndarray | None] = [None] * len(self.weights)
        for l in range(len(self.weights) - 1, -1, -1):
            d_w = d_h.T @ acts[l]
            d_b = d_h.sum(axis=0)
            grads[l] = np.concatenate([d_w.ravel(), d_b.ravel()])
            d_h = d_h @ self.weights[l]
            if l > 0:
                d_h = d_h * (1.0 - acts[l] ** 2)
        d_x = d_h * self.input_scale
        return np.concatenate(grads), d_x

    def param_arrays(self) -> list[tuple[str, np.ndarray]]:
        out = []
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            out.append((f"layers[{l}].weight", w))
            out.append((f"layers[{l}].bias", b))
        return out

    def reg_array_names(self) -> tuple[str, ...]:
        return ("weight",)

    def copy(self) -> "MlpNetwork":
        return load_mlp(save_mlp(self))

    def to_checkpoint_dict(self) -> dict:
        return {
            "format_version": CHECKPOINT_VERSION,
            "model": "mlp",
            "widths": self.widths,
            "input_norm": {
                "shift": self.input_shift.tolist(),
                "scale": self.input_scale.tolist(),
            },
            "layers": [
                {"weight": w.tolist(), "bias": b.tolist()}
                for w, b in zip(self.weights, self.biases)
            ],
            "activation": "tanh",
        }

    @classmethod
    def from_checkpoint_dict(cls, doc: dict) -> "MlpNetwork":
        norm = _field(doc, "input_norm", dict)
        layer_docs = _field(doc, "layers", list)
        weights = []
        biases = []
        for l, ldoc in enumerate(layer_docs):
            weights.append(np.asarray(_field(ldoc, "weight", list, f"layers[{l}]"), dtype=float))
            biases.append(np.asarray(_field(ldoc, "bias", list, f"layers[{l}]"), dtype=float))
        try:
            return cls(
                weights,
                biases,
                input_shift=np.asarray(_field(norm, "shift", list, "input_norm"), dtype=float),
                input_scale=np.asarray(_field(norm, "scale", list, "input_norm"), dtype=float),
            )
        except ValueError as exc:
            raise CheckpointError(str(exc)) from exc


def save_mlp(net: MlpNetwork) -> bytes:
    return (canonical_json(net.to_checkpoint_dict()) + "\n").encode("utf-8")


def load_mlp(data: bytes | str) -> MlpNetwork:
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"invalid JSON: {exc}") from exc
    if doc.get("format_version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"format_version: expected {CHECKPOINT_VERSION}, got {doc.get('format_version')!r}")
    if doc.get("model") != "mlp":
        raise CheckpointError(f"model: expected 'mlp', got {doc.get('model')!r}")
    return MlpNetwork.from_checkpoint_dict(doc)
