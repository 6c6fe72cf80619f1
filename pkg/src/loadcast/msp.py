"""Multivariate state predictor: forecasts future appliance operational
states from a historical load window.

Architecture: a shared 1-D conv trunk over all variables, one
per-variable extractor head (1-D conv + linear) producing that
variable's future class logits, and a fusion layer mixing the
concatenated per-variable logits at each future step. Trained with
multitask cross-entropy against cluster-derived state labels, it
becomes the frozen teacher whose class probabilities weight the
forecaster's training loss.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import checkpoint, nn
from .data import WindowSample
from .errors import ConfigError, ShapeError
from .train import (
    DEFAULT_BATCH,
    DEFAULT_LR,
    DEFAULT_MAX_EPOCHS,
    DEFAULT_PATIENCE,
    TrainHistory,
    stack_inputs,
    stack_states,
    train_loop,
)


@dataclass
class MspConfig:
    lookback: int
    horizon: int
    n_variables: int
    class_counts: list[int]
    trunk_channels: int = 32
    ue_channels: int = 16
    kernel_width: int = 3
    seed: int = 0

    def __post_init__(self) -> None:
        if min(self.lookback, self.horizon, self.n_variables) < 1:
            raise ConfigError("lookback, horizon, and n_variables must all be >= 1")
        if len(self.class_counts) != self.n_variables:
            raise ConfigError(
                f"{len(self.class_counts)} class counts for {self.n_variables} variables"
            )
        if any(not 2 <= int(n) <= 5 for n in self.class_counts):
            raise ConfigError(f"class counts must lie in [2, 5], got {self.class_counts}")
        self.class_counts = [int(n) for n in self.class_counts]

    @property
    def total_classes(self) -> int:
        return int(sum(self.class_counts))

    @property
    def group_offsets(self) -> list[int]:
        offsets = [0]
        for n in self.class_counts:
            offsets.append(offsets[-1] + n)
        return offsets


@dataclass
class GroupedLogits:
    """Future-step class logits, one column group per variable."""

    logits: np.ndarray  # (H, total_classes)
    class_counts: list[int]

    def groups(self):
        start = 0
        for n in self.class_counts:
            yield self.logits[..., start : start + n]
            start += n


class MspModel:
    """Shared trunk, per-variable extractors, per-step fusion layer."""

    def __init__(self, config: MspConfig):
        self.config = config
        rng = np.random.default_rng(np.random.SeedSequence(entropy=(config.seed, 11)))
        c = config
        self.trunk = nn.init_conv1d(rng, c.n_variables, c.trunk_channels, c.kernel_width)
        self.extractor_convs = []
        self.extractor_linears = []
        for n in c.class_counts:
            self.extractor_convs.append(
                nn.init_conv1d(rng, c.trunk_channels, c.ue_channels, c.kernel_width)
            )
            self.extractor_linears.append(
                nn.init_linear(rng, c.ue_channels * c.lookback, c.horizon * n)
            )
        self.fusion = nn.init_linear(rng, c.total_classes, c.total_classes)

    def params(self) -> list[np.ndarray]:
        out = [self.trunk.weights, self.trunk.bias]
        for conv, lin in zip(self.extractor_convs, self.extractor_linears):
            out += [conv.weights, conv.bias, lin.weights, lin.bias]
        out += [self.fusion.weights, self.fusion.bias]
        return out

    def param_names(self) -> list[str]:
        names = ["trunk.weights", "trunk.bias"]
        for i in range(self.config.n_variables):
            names += [
                f"extractor{i}.conv.weights",
                f"extractor{i}.conv.bias",
                f"extractor{i}.linear.weights",
                f"extractor{i}.linear.bias",
            ]
        names += ["fusion.weights", "fusion.bias"]
        return names

    def forward_batch(self, x: np.ndarray, want_cache: bool = False):
        """Logits for a batch of windows; x is (B, L, D) -> (B, H, sumN)."""
        c = self.config
        if x.ndim != 3 or x.shape[1:] != (c.lookback, c.n_variables):
            raise ShapeError(
                f"input shape {x.shape} does not match (batch, {c.lookback}, {c.n_variables})"
            )
        b = x.shape[0]
        c0 = np.ascontiguousarray(x.transpose(0, 2, 1))  # (B, D, L)
        t1 = nn.conv1d_forward(self.trunk, c0)
        a1 = nn.relu(t1)
        group_logits = []
        cache_heads = []
        for conv, lin, n in zip(self.extractor_convs, self.extractor_linears, c.class_counts):
            u = nn.conv1d_forward(conv, a1)
            r = nn.relu(u)
            f = r.reshape(b, -1)
            g = nn.linear_forward(lin, f)
            group_logits.append(g.reshape(b, c.horizon, n))
            if want_cache:
                cache_heads.append((u, f))
        zu = np.concatenate(group_logits, axis=2)
        zf = zu.reshape(b * c.horizon, c.total_classes)
        z = nn.linear_forward(self.fusion, zf).reshape(b, c.horizon, c.total_classes)
        if want_cache:
            return z, (c0, t1, a1, cache_heads, zf)
        return z

    def backward_batch(self, cache, dz: np.ndarray) -> list[np.ndarray]:
        """Gradients for every parameter block, in params() order."""
        c = self.config
        c0, t1, a1, cache_heads, zf = cache
        b = dz.shape[0]
        (dwf, dbf), dzf = nn.linear_backward(
            self.fusion, zf, dz.reshape(b * c.horizon, c.total_classes)
        )
        dzu = dzf.reshape(b, c.horizon, c.total_classes)
        da1 = np.zeros_like(a1)
        head_grads = []
        start = 0
        for conv, lin, n, (u, f) in zip(
            self.extractor_convs, self.extractor_linears, c.class_counts, cache_heads
        ):
            dg = np.ascontiguousarray(dzu[:, :, start : start + n]).reshape(b, -1)
            start += n
            (dwl, dbl), df = nn.linear_backward(lin, f, dg)
            dr = df.reshape(u.shape)
            du = nn.relu_backward(u, dr)
            (dwc, dbc), da1_i = nn.conv1d_backward(conv, a1, du)
            da1 += da1_i
            head_grads += [dwc, dbc, dwl, dbl]
        dt1 = nn.relu_backward(t1, da1)
        (dwt, dbt), _ = nn.conv1d_backward(self.trunk, c0, dt1)
        return [dwt, dbt] + head_grads + [dwf, dbf]


def msp_forward(model: MspModel, x: np.ndarray) -> GroupedLogits:
    """Logits for one lookback window; x is (L, D)."""
    c = model.config
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (c.lookback, c.n_variables):
        raise ShapeError(f"input shape {x.shape} does not match ({c.lookback}, {c.n_variables})")
    z = model.forward_batch(x[None])
    return GroupedLogits(z[0], list(c.class_counts))


def decode_states(grouped: GroupedLogits) -> np.ndarray:
    """Argmax class per (step, variable); ties go to the lowest class id."""
    cols = [g.argmax(axis=-1) for g in grouped.groups()]
    return np.stack(cols, axis=-1)


def _grouped_softmax(z: np.ndarray, class_counts: Sequence[int]) -> np.ndarray:
    probs = np.empty_like(z)
    start = 0
    for n in class_counts:
        probs[..., start : start + n] = nn.softmax_rows(z[..., start : start + n])
        start += n
    return probs


def msp_loss(grouped: GroupedLogits, targets: np.ndarray) -> tuple[float, np.ndarray]:
    """Multitask cross-entropy over per-variable softmax groups.

    targets is (H, D) integer states. Returns the scalar loss and its
    gradient w.r.t. the logits (same shape as grouped.logits).
    """
    z = grouped.logits
    counts = grouped.class_counts
    h = z.shape[0]
    d = len(counts)
    targets = np.asarray(targets)
    if targets.shape != (h, d):
        raise ShapeError(f"targets shape {targets.shape} does not match ({h}, {d})")
    for i, n in enumerate(counts):
        bad = (targets[:, i] < 0) | (targets[:, i] >= n)
        if bad.any():
            tau = int(np.argmax(bad))
            raise ShapeError(
                f"state target {targets[tau, i]} out of range [0, {n}) at step {tau}, variable {i}"
            )
    probs = _grouped_softmax(z, counts)
    loss = 0.0
    grad = probs.copy()
    start = 0
    rows = np.arange(h)
    for i, n in enumerate(counts):
        p = probs[:, start : start + n]
        loss += -np.log(p[rows, targets[:, i]]).sum()
        grad[rows, start + targets[:, i]] -= 1.0
        start += n
    loss /= h * d
    grad /= h * d
    return float(loss), grad


def _batch_loss_grad(z: np.ndarray, targets: np.ndarray, counts: Sequence[int]):
    """Batched version of msp_loss; z is (B, H, sumN), targets (B, H, D)."""
    b, h, _ = z.shape
    d = len(counts)
    probs = _grouped_softmax(z, counts)
    grad = probs.copy()
    loss = 0.0
    start = 0
    bidx = np.arange(b)[:, None]
    hidx = np.arange(h)[None, :]
    for i, n in enumerate(counts):
        t = targets[:, :, i]
        p = probs[:, :, start : start + n]
        loss += -np.log(p[bidx, hidx, t]).sum()
        grad[bidx, hidx, start + t] -= 1.0
        start += n
    scale = b * h * d
    return loss / scale, grad / scale


def state_accuracy(model: MspModel, samples: Sequence[WindowSample], batch_size: int = 256) -> float:
    """Fraction of (step, variable) cells whose decoded state matches."""
    if not samples:
        raise ConfigError("no samples to score")
    correct = 0
    total = 0
    counts = model.config.class_counts
    for start in range(0, len(samples), batch_size):
        chunk = samples[start : start + batch_size]
        z = model.forward_batch(stack_inputs(chunk))
        targets = stack_states(chunk)
        cols = []
        off = 0
        for n in counts:
            cols.append(z[:, :, off : off + n].argmax(axis=-1))
            off += n
        decoded = np.stack(cols, axis=-1)
        correct += int((decoded == targets).sum())
        total += targets.size
    return correct / total


def train_msp(
    model: MspModel,
    train_samples: Sequence[WindowSample],
    val_samples: Sequence[WindowSample],
    lr: float = DEFAULT_LR,
    batch_size: int = DEFAULT_BATCH,
    patience: int = DEFAULT_PATIENCE,
    max_epochs: int = DEFAULT_MAX_EPOCHS,
) -> TrainHistory:
    """Stage-1 training: minimize multitask cross-entropy with Adam and
    early stopping; the model is left at its best-validation snapshot."""
    if not train_samples or not val_samples:
        raise ConfigError("train and validation sets must both be nonempty")
    counts = model.config.class_counts
    x_train = stack_inputs(train_samples)
    s_train = stack_states(train_samples)
    x_val = stack_inputs(val_samples)
    s_val = stack_states(val_samples)

    def batch_fn(idx: np.ndarray):
        z, cache = model.forward_batch(x_train[idx], want_cache=True)
        loss, dz = _batch_loss_grad(z, s_train[idx], counts)
        return loss, model.backward_batch(cache, dz)

    def val_fn() -> float:
        total = 0.0
        rows = 0
        for start in range(0, x_val.shape[0], batch_size):
            xb = x_val[start : start + batch_size]
            z = model.forward_batch(xb)
            loss, _ = _batch_loss_grad(z, s_val[start : start + batch_size], counts)
            total += loss * xb.shape[0]
            rows += xb.shape[0]
        return total / rows

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


def save_msp(model: MspModel, path: str | Path) -> None:
    c = model.config
    config = {
        "lookback": c.lookback,
        "horizon": c.horizon,
        "n_variables": c.n_variables,
        "class_counts": list(c.class_counts),
        "trunk_channels": c.trunk_channels,
        "ue_channels": c.ue_channels,
        "kernel_width": c.kernel_width,
        "seed": c.seed,
    }
    checkpoint.save_container(path, "msp", config, model.param_names(), model.params())


def load_msp(path: str | Path) -> MspModel:
    kind, config, arrays = checkpoint.load_container(path)
    if kind != "msp":
        raise ConfigError(f"checkpoint kind {kind!r} is not an msp model")
    model = MspModel(MspConfig(**config))
    for name, param in zip(model.param_names(), model.params()):
        stored = arrays.get(name)
        if stored is None or stored.shape != param.shape:
            raise ConfigError(f"checkpoint block {name!r} missing or mis-shaped")
        param[...] = stored
    return model


def param_checksum(model) -> float:
    """Cheap fingerprint of all parameter values (teacher-frozen checks)."""
    return float(sum(np.abs(p).sum() for p in model.params()))
