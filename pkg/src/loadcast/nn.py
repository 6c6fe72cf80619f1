"""Minimal dense numeric kernel: layers with hand-derived gradients.

Everything runs in float64 on plain numpy arrays. Three layer kinds
(linear, 1-D convolution, ReLU) are enough for every model in this
package, so gradients are written out by hand instead of taping a
general autodiff graph. A central finite-difference checker validates
them at test time.

Convolution here is true convolution (kernel flipped), matching
``np.convolve(x, kernel, mode="same")`` for a single channel, with
symmetric zero padding so the temporal length is preserved.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import NumericError, ShapeError

Array = np.ndarray


def _require_finite(x: Array, what: str) -> None:
    if not np.isfinite(x).all():
        raise NumericError(f"{what} contains non-finite values (NaN/Inf)")


def glorot_uniform(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int, fan_out: int) -> Array:
    """Uniform init in +-sqrt(6/(fan_in+fan_out))."""
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


@dataclass
class LayerParams:
    """Parameters of one layer.

    kind "linear": weights (n_in, n_out), bias (n_out,).
    kind "conv1d": weights (out_channels, in_channels, kernel_width),
    bias (out_channels,), stride 1, same-length zero padding.
    """

    kind: str
    weights: Array
    bias: Array

    @property
    def kernel_width(self) -> int:
        return self.weights.shape[2]

    @property
    def in_channels(self) -> int:
        return self.weights.shape[1]

    @property
    def out_channels(self) -> int:
        return self.weights.shape[0]


def init_linear(rng: np.random.Generator, n_in: int, n_out: int) -> LayerParams:
    w = glorot_uniform(rng, (n_in, n_out), n_in, n_out)
    return LayerParams("linear", w, np.zeros(n_out))


def init_conv1d(rng: np.random.Generator, in_channels: int, out_channels: int, kernel_width: int) -> LayerParams:
    fan_in = in_channels * kernel_width
    fan_out = out_channels * kernel_width
    w = glorot_uniform(rng, (out_channels, in_channels, kernel_width), fan_in, fan_out)
    return LayerParams("conv1d", w, np.zeros(out_channels))


def linear_forward(params: LayerParams, x: Array) -> Array:
    """Rows of x through x @ W + bias. x is (rows, n_in)."""
    if params.kind != "linear":
        raise ShapeError(f"expected linear params, got kind={params.kind!r}")
    if x.ndim != 2 or x.shape[1] != params.weights.shape[0]:
        raise ShapeError(
            f"linear input shape {x.shape} incompatible with weights {params.weights.shape}"
        )
    _require_finite(x, "linear input")
    return x @ params.weights + params.bias


def linear_backward(params: LayerParams, x: Array, grad_out: Array) -> tuple[tuple[Array, Array], Array]:
    """Analytic gradients of linear_forward.

    Returns ((dweights, dbias), dinput) for upstream gradient grad_out
    shaped like the forward output.
    """
    if grad_out.shape != (x.shape[0], params.weights.shape[1]):
        raise ShapeError(
            f"upstream grad shape {grad_out.shape} does not match output "
            f"({x.shape[0]}, {params.weights.shape[1]})"
        )
    dw = x.T @ grad_out
    db = grad_out.sum(axis=0)
    dx = grad_out @ params.weights.T
    return (dw, db), dx


def _conv_windows(x: Array, k: int) -> Array:
    """Sliding width-k views over zero-padded time axis; keeps length T.

    x is (..., C, T); result is (..., C, T, k) with window t covering
    padded positions [t, t+k).
    """
    t = x.shape[-1]
    c = (k - 1) // 2
    pad = [(0, 0)] * (x.ndim - 1) + [(k - 1 - c, c)]
    xp = np.pad(x, pad)
    return np.lib.stride_tricks.sliding_window_view(xp, k, axis=-1)


def conv1d_forward(params: LayerParams, x: Array) -> Array:
    """True 1-D convolution, stride 1, output length equals input length.

    x is (in_channels, T) for one sample or (batch, in_channels, T);
    the output swaps in_channels for out_channels. Single-channel
    output agrees with np.convolve(x, kernel, mode="same").
    """
    if params.kind != "conv1d":
        raise ShapeError(f"expected conv1d params, got kind={params.kind!r}")
    if x.ndim not in (2, 3) or x.shape[-2] != params.in_channels:
        raise ShapeError(
            f"conv1d input shape {x.shape} incompatible with weights {params.weights.shape}"
        )
    t = x.shape[-1]
    k = params.kernel_width
    if k > 2 * t + 1:
        raise ShapeError(f"kernel width {k} exceeds 2*time+1 = {2 * t + 1}")
    _require_finite(x, "conv1d input")
    win = _conv_windows(x, k)
    wflip = params.weights[:, :, ::-1]
    if x.ndim == 2:
        out = np.einsum("oik,itk->ot", wflip, win, optimize=True)
        return out + params.bias[:, None]
    out = np.einsum("oik,bitk->bot", wflip, win, optimize=True)
    return out + params.bias[None, :, None]


def conv1d_backward(params: LayerParams, x: Array, grad_out: Array) -> tuple[tuple[Array, Array], Array]:
    """Analytic gradients of conv1d_forward for 2-D or batched 3-D input."""
    t = x.shape[-1]
    k = params.kernel_width
    expected = x.shape[:-2] + (params.out_channels, t)
    if grad_out.shape != expected:
        raise ShapeError(f"upstream grad shape {grad_out.shape} does not match output {expected}")
    win = _conv_windows(x, k)
    if x.ndim == 2:
        dwflip = np.einsum("ot,itk->oik", grad_out, win, optimize=True)
        db = grad_out.sum(axis=-1)
    else:
        dwflip = np.einsum("bot,bitk->oik", grad_out, win, optimize=True)
        db = grad_out.sum(axis=(0, 2))
    dw = dwflip[:, :, ::-1].copy()

    # dx is the correlation of grad_out with the un-flipped kernel: pad the
    # upstream grad on both sides, window it, contract out_channels and taps.
    c = (k - 1) // 2
    pad = [(0, 0)] * (x.ndim - 1) + [(k - 1, k - 1)]
    gp = np.pad(grad_out, pad)
    gwin = np.lib.stride_tricks.sliding_window_view(gp, k, axis=-1)
    if x.ndim == 2:
        dxp = np.einsum("oik,opk->ip", params.weights, gwin, optimize=True)
        dx = dxp[:, k - 1 - c : k - 1 - c + t]
    else:
        dxp = np.einsum("oik,bopk->bip", params.weights, gwin, optimize=True)
        dx = dxp[:, :, k - 1 - c : k - 1 - c + t]
    return (dw, db), np.ascontiguousarray(dx)


def layer_backward(params: LayerParams, x: Array, grad_out: Array) -> tuple[tuple[Array, Array], Array]:
    """Dispatch to the analytic backward of the layer kind."""
    if params.kind == "linear":
        return linear_backward(params, x, grad_out)
    if params.kind == "conv1d":
        return conv1d_backward(params, x, grad_out)
    raise ShapeError(f"unknown layer kind {params.kind!r}")


def relu(x: Array) -> Array:
    return np.maximum(x, 0.0)


def relu_backward(x: Array, grad_out: Array) -> Array:
    # subgradient 0 at x == 0
    return grad_out * (x > 0)


def softmax_rows(logits: Array) -> Array:
    """Row-wise softmax, stabilized by max subtraction."""
    _require_finite(logits, "softmax logits")
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy(probabilities: Array, targets: Array) -> tuple[float, Array]:
    """Mean negative log-likelihood and its gradient w.r.t. the logits.

    probabilities are softmax outputs (rows sum to 1); targets is one
    class index per row. The logit gradient is (p - onehot) / rows,
    valid whenever the probabilities came from softmax_rows.
    """
    n, m = probabilities.shape
    targets = np.asarray(targets)
    if targets.shape != (n,):
        raise ShapeError(f"targets shape {targets.shape} does not match {n} rows")
    if targets.min() < 0 or targets.max() >= m:
        bad = int(np.argmax((targets < 0) | (targets >= m)))
        raise ShapeError(f"target class {targets[bad]} out of range [0, {m}) at row {bad}")
    picked = probabilities[np.arange(n), targets]
    loss = float(-np.log(picked).mean())
    grad = probabilities.copy()
    grad[np.arange(n), targets] -= 1.0
    return loss, grad / n


@dataclass
class AdamState:
    """Adam moments and step counter for a list of parameter blocks."""

    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: list[Array] = field(default_factory=list)
    v: list[Array] = field(default_factory=list)


def init_adam(params: Sequence[Array], lr: float = 0.001) -> AdamState:
    return AdamState(
        lr=lr,
        m=[np.zeros_like(p) for p in params],
        v=[np.zeros_like(p) for p in params],
    )


def adam_step(
    state: AdamState,
    params: Sequence[Array],
    grads: Sequence[Array],
    names: Sequence[str] | None = None,
) -> tuple[Sequence[Array], AdamState]:
    """One bias-corrected Adam update, in place on params and state."""
    if len(params) != len(grads):
        raise ShapeError(f"{len(params)} parameter blocks but {len(grads)} gradient blocks")
    for i, (p, g) in enumerate(zip(params, grads)):
        if p.shape != g.shape:
            raise ShapeError(f"gradient shape {g.shape} does not match parameter shape {p.shape}")
        if not np.isfinite(g).all():
            label = names[i] if names is not None else f"block {i}"
            raise NumericError(f"non-finite gradient in {label}")
    state.t += 1
    bc1 = 1.0 - state.beta1**state.t
    bc2 = 1.0 - state.beta2**state.t
    for i, (p, g) in enumerate(zip(params, grads)):
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g
        m_hat = state.m[i] / bc1
        v_hat = state.v[i] / bc2
        p -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return params, state


@dataclass
class GradCheckReport:
    max_rel_error: float
    worst_block: str
    worst_index: int
    per_block: dict[str, float]


def grad_check(
    loss_fn: Callable[[], float],
    params: Sequence[Array],
    analytic_grads: Sequence[Array],
    h: float = 1e-5,
    names: Sequence[str] | None = None,
) -> GradCheckReport:
    """Compare analytic gradients against central finite differences.

    loss_fn re-evaluates the (deterministic) loss at the current
    parameter values; each entry of each block is probed at +-h. The
    relative error denominator is floored at 1e-6 so exact zeros on
    both sides count as zero error.
    """
    if names is None:
        names = [f"block {i}" for i in range(len(params))]
    worst = 0.0
    worst_block = ""
    worst_index = -1
    per_block: dict[str, float] = {}
    for name, p, g in zip(names, params, analytic_grads):
        flat = p.reshape(-1)
        gflat = np.asarray(g).reshape(-1)
        block_worst = 0.0
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            lp = loss_fn()
            flat[i] = orig - h
            lm = loss_fn()
            flat[i] = orig
            fd = (lp - lm) / (2.0 * h)
            rel = abs(fd - gflat[i]) / max(abs(fd), abs(gflat[i]), 1e-6)
            if rel > block_worst:
                block_worst = rel
            if rel > worst:
                worst, worst_block, worst_index = rel, name, i
        per_block[name] = block_worst
    return GradCheckReport(worst, worst_block, worst_index, per_block)
