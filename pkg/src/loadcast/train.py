"""Shared mini-batch training loop with early stopping.

One loop serves the state predictor and both forecaster training modes,
so batching, shuffling, and stopping decisions are identical wherever
two runs are expected to coincide bit-for-bit (e.g. guided training
with alpha=0 versus plain training under the same seed).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Protocol, Sequence

import numpy as np

from . import nn
from .errors import ConfigError

DEFAULT_LR = 0.001
DEFAULT_BATCH = 128
DEFAULT_PATIENCE = 10
DEFAULT_MAX_EPOCHS = 100


class Trainable(Protocol):
    def params(self) -> list[np.ndarray]: ...

    def param_names(self) -> list[str]: ...


@dataclass
class TrainHistory:
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    best_epoch: int = 0
    stopped_epoch: int = 0

    @property
    def best_val_loss(self) -> float:
        return self.val_loss[self.best_epoch - 1]


def train_loop(
    model: Trainable,
    n_train: int,
    batch_fn: Callable[[np.ndarray], tuple[float, list[np.ndarray]]],
    val_fn: Callable[[], float],
    lr: float = DEFAULT_LR,
    batch_size: int = DEFAULT_BATCH,
    patience: int = DEFAULT_PATIENCE,
    max_epochs: int = DEFAULT_MAX_EPOCHS,
    seed: int = 0,
) -> TrainHistory:
    """Adam + early stopping; restores the best-validation snapshot.

    batch_fn maps an index array into train samples to (loss, grads);
    val_fn scores the current model on the validation set (lower is
    better). Stops once validation fails to improve for `patience`
    consecutive epochs, or at max_epochs. Tail batches smaller than
    batch_size are used as-is.
    """
    if n_train < 1:
        raise ConfigError("training set is empty")
    params = model.params()
    names = model.param_names()
    state = nn.init_adam(params, lr=lr)
    rng = np.random.default_rng(np.random.SeedSequence(entropy=(seed, 101)))
    history = TrainHistory()
    best_val = np.inf
    best_params = [p.copy() for p in params]
    bad_epochs = 0
    for epoch in range(1, max_epochs + 1):
        perm = rng.permutation(n_train)
        epoch_losses = []
        for start in range(0, n_train, batch_size):
            idx = perm[start : start + batch_size]
            loss, grads = batch_fn(idx)
            nn.adam_step(state, params, grads, names)
            epoch_losses.append(loss)
        val = val_fn()
        history.train_loss.append(float(np.mean(epoch_losses)))
        history.val_loss.append(float(val))
        history.stopped_epoch = epoch
        if val < best_val:
            best_val = val
            best_params = [p.copy() for p in params]
            history.best_epoch = epoch
            bad_epochs = 0
        else:
            bad_epochs += 1
            if bad_epochs >= patience:
                break
    for p, best in zip(params, best_params):
        p[...] = best
    return history


def stack_inputs(samples: Sequence) -> np.ndarray:
    return np.stack([s.x for s in samples])


def stack_targets(samples: Sequence) -> np.ndarray:
    return np.stack([s.y for s in samples])


def stack_states(samples: Sequence) -> np.ndarray:
    return np.stack([s.s for s in samples])
