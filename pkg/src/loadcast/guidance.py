"""Event-response guidance: turn frozen state-predictor logits into
per-(step, variable) loss weights and train forecasters under the
combined objective  loss = MAE + alpha * weighted-MAE.

The weight for a future cell is the maximum class probability the
teacher assigns to that variable at that step, so confidently
predicted state patterns (events and steady operation alike) pull more
of the forecaster's attention than cells the teacher finds noisy. The
teacher is read-only throughout; validation and model selection use
plain MAE so guidance shapes optimization only.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import nn
from .data import WindowSample
from .errors import ConfigError, ShapeError
from .msp import GroupedLogits
from .train import (
    DEFAULT_BATCH,
    DEFAULT_LR,
    DEFAULT_MAX_EPOCHS,
    DEFAULT_PATIENCE,
    TrainHistory,
    stack_inputs,
    stack_targets,
    train_loop,
)

WEIGHT_MODES = ("prob", "logit")


@dataclass
class GuidanceConfig:
    """alpha scales the weighted term; mode "prob" uses max softmax
    probability per group (bounded in (0, 1]), "logit" the raw logit
    max (unbounded; kept for ablation)."""

    alpha: float = 1.0
    mode: str = "prob"

    def __post_init__(self) -> None:
        if self.alpha < 0:
            raise ConfigError(f"alpha must be >= 0, got {self.alpha}")
        if self.mode not in WEIGHT_MODES:
            raise ConfigError(f"mode must be one of {WEIGHT_MODES}, got {self.mode!r}")


def _weights_from_logits(z: np.ndarray, class_counts: Sequence[int], mode: str) -> np.ndarray:
    cols = []
    start = 0
    for n in class_counts:
        group = z[..., start : start + n]
        if mode == "prob":
            group = nn.softmax_rows(group)
        cols.append(group.max(axis=-1))
        start += n
    return np.stack(cols, axis=-1)


def event_weights(grouped: GroupedLogits, mode: str = "prob") -> np.ndarray:
    """Per-(step, variable) weights from grouped logits; (H, D).

    In "prob" mode every weight lies in [1/n_i, 1] for a variable with
    n_i classes (softmax max is at least uniform).
    """
    if mode not in WEIGHT_MODES:
        raise ConfigError(f"mode must be one of {WEIGHT_MODES}, got {mode!r}")
    return _weights_from_logits(grouped.logits, grouped.class_counts, mode)


def guided_loss(
    yhat: np.ndarray, y: np.ndarray, weights: np.ndarray, alpha: float
) -> tuple[float, np.ndarray]:
    """Combined loss MAE + alpha * mean(weights * |err|), with its
    subgradient w.r.t. yhat (0 at exact ties)."""
    yhat = np.asarray(yhat, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    if yhat.shape != y.shape:
        raise ShapeError(f"prediction shape {yhat.shape} does not match target {y.shape}")
    if weights.shape != yhat.shape:
        raise ShapeError(f"weights shape {weights.shape} does not match predictions {yhat.shape}")
    if alpha < 0:
        raise ConfigError(f"alpha must be >= 0, got {alpha}")
    err = yhat - y
    ae = np.abs(err)
    loss = float(ae.mean() + alpha * (weights * ae).mean())
    grad = np.sign(err) * (1.0 + alpha * weights) / err.size
    return loss, grad


def teacher_weights(
    msp_model, samples: Sequence[WindowSample], mode: str = "prob", batch_size: int = DEFAULT_BATCH
) -> np.ndarray:
    """Weights for every sample's future block, (n, H, D). The teacher
    is frozen, so these are computed once and reused across epochs."""
    counts = msp_model.config.class_counts
    out = []
    for start in range(0, len(samples), batch_size):
        xb = stack_inputs(samples[start : start + batch_size])
        z = msp_model.forward_batch(xb)
        out.append(_weights_from_logits(z, counts, mode))
    return np.concatenate(out, axis=0)


def train_guided(
    model,
    msp_model,
    train_samples: Sequence[WindowSample],
    val_samples: Sequence[WindowSample],
    config: GuidanceConfig,
    lr: float = DEFAULT_LR,
    batch_size: int = DEFAULT_BATCH,
    patience: int = DEFAULT_PATIENCE,
    max_epochs: int = DEFAULT_MAX_EPOCHS,
    precomputed_weights: np.ndarray | None = None,
) -> TrainHistory:
    """Train a forecaster under the guided objective.

    msp_model None trains under plain MAE (no weights computed); the
    two paths batch, shuffle, and stop identically, so alpha=0 guided
    training reproduces plain training bit-for-bit under one seed.
    precomputed_weights may carry teacher_weights() output for the
    train samples to share one weight pass across runs (the teacher is
    frozen, so recomputation is pure overhead).
    """
    if not train_samples or not val_samples:
        raise ConfigError("train and validation sets must both be nonempty")
    x_train = stack_inputs(train_samples)
    y_train = stack_targets(train_samples)
    x_val = stack_inputs(val_samples)
    y_val = stack_targets(val_samples)
    weights = None
    if precomputed_weights is not None:
        if precomputed_weights.shape != y_train.shape:
            raise ShapeError(
                f"precomputed weights shape {precomputed_weights.shape} does not match "
                f"targets {y_train.shape}"
            )
        weights = precomputed_weights
    elif msp_model is not None:
        weights = teacher_weights(msp_model, train_samples, config.mode, batch_size)
    alpha = config.alpha
    size_per = y_train.shape[1] * y_train.shape[2]

    def batch_fn(idx: np.ndarray):
        yhat, cache = model.forward_batch(x_train[idx], want_cache=True)
        err = yhat - y_train[idx]
        ae = np.abs(err)
        n = err.size
        if weights is None:
            loss = float(ae.mean())
            dy = np.sign(err) / n
        else:
            wb = weights[idx]
            loss = float(ae.mean() + alpha * (wb * ae).mean())
            dy = np.sign(err) * (1.0 + alpha * wb) / n
        return loss, model.backward_batch(cache, dy)

    def val_fn() -> float:
        total = 0.0
        for start in range(0, x_val.shape[0], batch_size):
            yhat = model.forward_batch(x_val[start : start + batch_size])
            total += float(np.abs(yhat - y_val[start : start + batch_size]).sum())
        return total / (x_val.shape[0] * size_per)

    return train_loop(
        model,
        n_train=x_train.shape[0],
        batch_fn=batch_fn,
        val_fn=val_fn,
        lr=lr,
        batch_size=batch_size,
        patience=patience,
        max_epochs=max_epochs,
        seed=model.config.seed,
    )
