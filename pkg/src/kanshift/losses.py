"""Constraint-informed losses, the log output transform, and the regularizer.

Two loss modes exist.  The plain mode regresses the signed shift directly and
adds a one-sided penalty ReLU(|t*| - prediction)^2.  The log mode regresses
y = log|t*| and penalizes ReLU(y - prediction)^2, i.e. predictions whose
magnitude falls short of the target; the trained output is mapped back to a
shift by ``transform_output``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .network import ParameterTape

NON_POSITIVE = "non_positive"
NON_NEGATIVE = "non_negative"
PLAIN_MSRELU = "plain_msrelu"
LOG_MSRELU = "log_msrelu"

__all__ = [
    "NON_POSITIVE",
    "NON_NEGATIVE",
    "PLAIN_MSRELU",
    "LOG_MSRELU",
    "DatasetHygieneError",
    "LossSpec",
    "LossBreakdown",
    "transform_output",
    "log_targets",
    "regularizer",
    "regularizer_grad",
    "loss_plain",
    "loss_log",
    "loss_terms",
    "loss_grad_wrt_pred",
]


class DatasetHygieneError(ValueError):
    """Raised when a dataset violates a loss-mode precondition."""


@dataclass
class LossSpec:
    """Which loss to train with and how to weight its pieces."""

    mode: str = LOG_MSRELU
    theta_c: float = 1.0
    reg_weight: float = 0.0
    sign: str = NON_POSITIVE

    def __post_init__(self) -> None:
        if self.mode not in (PLAIN_MSRELU, LOG_MSRELU):
            raise ValueError(f"unknown loss mode {self.mode!r}")
        if self.sign not in (NON_POSITIVE, NON_NEGATIVE):
            raise ValueError(f"unknown sign convention {self.sign!r}")
        if self.theta_c < 0:
            raise ValueError("theta_c must be non-negative")
        if self.reg_weight < 0:
            raise ValueError("reg_weight must be non-negative")


@dataclass
class LossBreakdown:
    regression: float
    constraint: float
    regularizer: float
    total: float


def transform_output(raw, spec: LossSpec):
    """Map a raw log-magnitude output to a signed time shift in seconds."""
    raw = np.asarray(raw, dtype=float)
    mag = np.exp(raw)
    shift = -mag if spec.sign == NON_POSITIVE else mag
    return float(shift) if shift.ndim == 0 else shift


def log_targets(t_star: np.ndarray) -> np.ndarray:
    """log|t*| targets; zero shifts are a dataset-hygiene error."""
    t_star = np.asarray(t_star, dtype=float)
    zeros = int(np.count_nonzero(t_star == 0))
    if zeros:
        raise DatasetHygieneError(
            f"{zeros} sample(s) have a zero time shift; log targets are undefined, filter them out"
        )
    return np.log(np.abs(t_star))


def regularizer(model) -> float:
    """Mean absolute value of all spline coefficients (alpha/beta excluded)."""
    names = model.reg_array_names()
    total = 0.0
    count = 0
    for name, arr in model.param_arrays():
        if name.rsplit(".", 1)[-1] in names:
            total += float(np.abs(arr).sum())
            count += arr.size
    return total / count if count else 0.0


def regularizer_grad(model, tape: ParameterTape) -> np.ndarray:
    """Subgradient of the mean-|theta| regularizer in tape order (0 at 0)."""
    mask = tape.mask_for(model.reg_array_names())
    count = int(mask.sum())
    grad = np.zeros(len(tape))
    if count:
        params = tape.read()
        grad[mask] = np.sign(params[mask]) / count
    return grad


def loss_terms(pred: np.ndarray, t_star: np.ndarray, spec: LossSpec) -> tuple[float, float]:
    """(regression, constraint) means for a batch of predictions."""
    pred = np.asarray(pred, dtype=float)
    t_star = np.asarray(t_star, dtype=float)
    if pred.size == 0:
        raise ValueError("empty batch")
    if spec.mode == PLAIN_MSRELU:
        target = t_star
        gap = np.maximum(np.abs(t_star) - pred, 0.0)
    else:
        target = log_targets(t_star)
        gap = np.maximum(target - pred, 0.0)
    regression = float(np.mean((target - pred) ** 2))
    constraint = float(np.mean(gap**2))
    return regression, constraint


def loss_grad_wrt_pred(pred: np.ndarray, t_star: np.ndarray, spec: LossSpec) -> np.ndarray:
    """d(total)/d(prediction) per sample, regularizer excluded."""
    pred = np.asarray(pred, dtype=float)
    t_star = np.asarray(t_star, dtype=float)
    n = pred.size
    if spec.mode == PLAIN_MSRELU:
        target = t_star
        gap = np.maximum(np.abs(t_star) - pred, 0.0)
    else:
        target = log_targets(t_star)
        gap = np.maximum(target - pred, 0.0)
    return 2.0 * (pred - target) / n - spec.theta_c * 2.0 * gap / n


def _assemble(model, x, t_star, spec: LossSpec) -> tuple[float, LossBreakdown]:
    pred = model.forward_batch(np.asarray(x, dtype=float))
    regression, constraint = loss_terms(pred, t_star, spec)
    reg = regularizer(model)
    total = regression + spec.theta_c * constraint + spec.reg_weight * reg
    return total, LossBreakdown(regression, constraint, reg, total)


def loss_plain(model, x, t_star, spec: LossSpec) -> tuple[float, LossBreakdown]:
    """Mean squared error on the signed shift plus the one-sided magnitude penalty."""
    if spec.mode != PLAIN_MSRELU:
        raise ValueError("loss_plain requires a plain_msrelu spec")
    return _assemble(model, x, t_star, spec)


def loss_log(model, x, t_star, spec: LossSpec) -> tuple[float, LossBreakdown]:
    """Log-magnitude regression with the one-sided under-prediction penalty."""
    if spec.mode != LOG_MSRELU:
        raise ValueError("loss_log requires a log_msrelu spec")
    return _assemble(model, x, t_star, spec)
