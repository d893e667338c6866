"""AdamW with decoupled weight decay on flat parameter vectors."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["AdamWState", "adamw_step"]


@dataclass
class AdamWState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 1e-4
    step_count: int = 0
    m: np.ndarray = field(default=None)
    v: np.ndarray = field(default=None)

    def __post_init__(self) -> None:
        if not 0 < self.beta1 < 1 or not 0 < self.beta2 < 1:
            raise ValueError("beta1/beta2 must lie in (0, 1)")
        if self.lr <= 0 or self.eps <= 0 or self.weight_decay < 0:
            raise ValueError("lr and eps must be positive, weight_decay non-negative")

    @classmethod
    def zeros(cls, n: int, **hyper) -> "AdamWState":
        return cls(m=np.zeros(n), v=np.zeros(n), **hyper)


def adamw_step(params: np.ndarray, grads: np.ndarray, state: AdamWState) -> np.ndarray:
    """One AdamW update; returns the new parameter vector, mutating the state."""
    params = np.asarray(params, dtype=float)
    grads = np.asarray(grads, dtype=float)
    if state.m is None:
        state.m = np.zeros_like(params)
        state.v = np.zeros_like(params)
    if not (params.shape == grads.shape == state.m.shape == state.v.shape):
        raise ValueError(
            f"length mismatch: params {params.shape}, grads {grads.shape}, moments {state.m.shape}"
        )
    state.step_count += 1
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * grads
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * grads**2
    m_hat = state.m / (1.0 - state.beta1**state.step_count)
    v_hat = state.v / (1.0 - state.beta2**state.step_count)
    return params - state.lr * (m_hat / (np.sqrt(v_hat) + state.eps)) - state.lr * state.weight_decay * params
