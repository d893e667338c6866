"""Mini-batch AdamW training for KAN and MLP regressors.

The loop is single-threaded and driven entirely by ``TrainConfig.seed``:
the validation split, batch shuffles, and therefore the whole history are
bit-reproducible.  Per-epoch history rows are evaluated full-batch with
frozen weights, and the returned model carries the best-validation epoch's
parameters.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .basis import EvaluationError
from .losses import (
    LOG_MSRELU,
    LossBreakdown,
    LossSpec,
    log_targets,
    loss_grad_wrt_pred,
    loss_terms,
    regularizer,
    regularizer_grad,
    transform_output,
)
from .mlp import MlpNetwork
from .network import ParameterTape
from .optim import AdamWState, adamw_step

__all__ = [
    "TrainConfig",
    "TrainResult",
    "TrainingDivergedError",
    "HISTORY_COLUMNS",
    "split_indices",
    "train",
    "train_mlp_baseline",
    "evaluate_breakdown",
    "evaluate_metrics",
    "history_rows",
]

HISTORY_COLUMNS = ["epoch", "train_total", "train_reg", "train_constraint", "train_regularizer", "val_total"]


class TrainingDivergedError(RuntimeError):
    """Training produced a non-finite loss."""

    def __init__(self, last_finite_epoch: int, history: list):
        super().__init__(f"training diverged; last finite epoch was {last_finite_epoch}")
        self.last_finite_epoch = last_finite_epoch
        self.history = history


@dataclass
class TrainConfig:
    epochs: int = 500
    batch_size: int = 64
    seed: int = 0
    validation_fraction: float = 0.2
    patience: int = 50
    grid_size: int = 5
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 1e-4

    def __post_init__(self) -> None:
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not 0 < self.validation_fraction < 1:
            raise ValueError("validation_fraction must lie in (0, 1)")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")


@dataclass
class EpochRow:
    epoch: int
    train_total: float
    train_reg: float
    train_constraint: float
    train_regularizer: float
    val_total: float

    def as_tuple(self):
        return (
            self.epoch,
            self.train_total,
            self.train_reg,
            self.train_constraint,
            self.train_regularizer,
            self.val_total,
        )


@dataclass
class TrainResult:
    model: object
    history: list[EpochRow]
    best_epoch: int
    best_val: float
    train_idx: np.ndarray = field(repr=False, default=None)
    val_idx: np.ndarray = field(repr=False, default=None)


def split_indices(n: int, validation_fraction: float, rng: np.random.Generator):
    """Deterministic train/validation split given an already-seeded rng."""
    perm = rng.permutation(n)
    n_val = max(1, int(round(n * validation_fraction)))
    if n_val >= n:
        raise ValueError("validation split leaves no training samples")
    return perm[n_val:], perm[:n_val]


def evaluate_breakdown(model, x, t_star, spec: LossSpec) -> LossBreakdown:
    """Full-batch loss pieces with frozen weights; used for history rows."""
    pred = model.forward_batch(np.asarray(x, dtype=float))
    regression, constraint = loss_terms(pred, t_star, spec)
    reg = regularizer(model)
    total = regression + spec.theta_c * constraint + spec.reg_weight * reg
    return LossBreakdown(regression, constraint, reg, total)


def train(model, x, t_star, spec: LossSpec, config: TrainConfig) -> TrainResult:
    """Mini-batch AdamW fit; returns the best-validation checkpoint."""
    x = np.asarray(x, dtype=float)
    t_star = np.asarray(t_star, dtype=float)
    if x.ndim != 2 or x.shape[0] != t_star.shape[0]:
        raise ValueError("x must be (n, d) with one target per row")
    if x.shape[0] < 10:
        raise ValueError(f"need at least 10 samples, got {x.shape[0]}")
    if spec.mode == LOG_MSRELU:
        log_targets(t_star)  # raises on zero shifts before any work happens

    rng = np.random.default_rng(config.seed)
    train_idx, val_idx = split_indices(x.shape[0], config.validation_fraction, rng)
    x_train, t_train = x[train_idx], t_star[train_idx]
    x_val, t_val = x[val_idx], t_star[val_idx]

    model.set_input_norm_from_data(x_train)
    tape = ParameterTape(model)
    opt = AdamWState.zeros(
        len(tape),
        lr=config.lr,
        beta1=config.beta1,
        beta2=config.beta2,
        eps=config.eps,
        weight_decay=config.weight_decay,
    )

    history: list[EpochRow] = []
    best_val = np.inf
    best_epoch = -1
    best_params = tape.read()
    since_best = 0

    for epoch in range(config.epochs):
        order = rng.permutation(train_idx.size)
        for start in range(0, order.size, config.batch_size):
            batch = order[start : start + config.batch_size]
            xb, tb = x_train[batch], t_train[batch]
            try:
                pred = model.forward_batch(xb)
            except EvaluationError:
                raise TrainingDivergedError(epoch - 1, history) from None
            if not np.all(np.isfinite(pred)):
                raise TrainingDivergedError(epoch - 1, history)
            d_pred = loss_grad_wrt_pred(pred, tb, spec)
            grads, _ = model.grad_batch(xb, d_pred)
            if spec.reg_weight > 0:
                grads = grads + spec.reg_weight * regularizer_grad(model, tape)
            tape.write(adamw_step(tape.read(), grads, opt))

        try:
            tr = evaluate_breakdown(model, x_train, t_train, spec)
            va = evaluate_breakdown(model, x_val, t_val, spec)
        except EvaluationError:
            raise TrainingDivergedError(epoch - 1, history) from None
        row = EpochRow(epoch, tr.total, tr.regression, tr.constraint, tr.regularizer, va.total)
        if not (np.isfinite(row.train_total) and np.isfinite(row.val_total)):
            raise TrainingDivergedError(epoch - 1, history)
        history.append(row)
        if va.total < best_val:
            best_val = va.total
            best_epoch = epoch
            best_params = tape.read()
            since_best = 0
        else:
            since_best += 1
            if since_best > config.patience:
                break

    tape.write(best_params)
    return TrainResult(model, history, best_epoch, best_val, train_idx, val_idx)


def train_mlp_baseline(
    x,
    t_star,
    spec: LossSpec,
    config: TrainConfig,
    hidden: tuple[int, int] = (16, 16),
) -> TrainResult:
    """The comparison baseline: same loss, optimizer, and data pipeline."""
    x = np.asarray(x, dtype=float)
    model = MlpNetwork.build(x.shape[1], hidden=hidden, seed=config.seed)
    return train(model, x, t_star, spec, config)


def evaluate_metrics(model, x, t_star, spec: LossSpec) -> dict:
    """Shared metrics schema for any checkpoint on a shift dataset.

    Reports RMSE in log space, RMSE in shift space after the output
    transform, and the fraction of magnitude under-predictions (the quantity
    the one-sided penalty targets).
    """
    x = np.asarray(x, dtype=float)
    t_star = np.asarray(t_star, dtype=float)
    pred = model.forward_batch(x)
    y = log_targets(t_star)
    shift_pred = transform_output(pred, spec)
    return {
        "count": int(t_star.size),
        "rmse_log": float(np.sqrt(np.mean((y - pred) ** 2))),
        "rmse_shift": float(np.sqrt(np.mean((t_star - shift_pred) ** 2))),
        "under_prediction_rate": float(np.mean(np.abs(shift_pred) < np.abs(t_star))),
    }


def history_rows(history: list[EpochRow]):
    return [row.as_tuple() for row in history]
