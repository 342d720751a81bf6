"""
Differentiable forward ops.

Shapes must match exactly; nothing broadcasts implicitly. Use
``broadcast_to`` when a smaller operand has to be expanded. Every op
checks its output for NaN/Inf and raises NumericError naming itself.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from samcnet.errors import ContractViolation, NumericError
from samcnet.tensor.core import BackwardFn, Tensor, current_tape

LEAKY_SLOPE = 0.2
BN_EPS = 1e-5
BN_MOMENTUM = 0.1


def _finish(op: str, data: np.ndarray, inputs: tuple[Tensor, ...], backward: BackwardFn) -> Tensor:
    if not np.all(np.isfinite(data)):
        raise NumericError(op)
    tape = current_tape()
    needs_grad = tape is not None and any(t.requires_grad for t in inputs)
    out = Tensor(data, requires_grad=needs_grad)
    if needs_grad:
        tape.record(op, inputs, out, backward)
    return out


def _same_shape(op: str, a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape:
        raise ContractViolation(f"{op}: shape mismatch {a.shape} vs {b.shape}")


def _axis(op: str, x: Tensor, axis: int) -> int:
    if not -x.ndim <= axis < x.ndim:
        raise ContractViolation(f"{op}: axis {axis} out of range for shape {x.shape}")
    return axis % x.ndim


# ---------------------------------------------------------------------------
# Linear algebra and elementwise arithmetic
# ---------------------------------------------------------------------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ContractViolation(f"matmul: cannot multiply {a.shape} by {b.shape}")
    a_data, b_data = a.data, b.data

    def backward(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return g @ b_data.T, a_data.T @ g

    return _finish("matmul", a_data @ b_data, (a, b), backward)


def add(a: Tensor, b: Tensor) -> Tensor:
    _same_shape("add", a, b)
    return _finish("add", a.data + b.data, (a, b), lambda g: (g, g))


def subtract(a: Tensor, b: Tensor) -> Tensor:
    _same_shape("subtract", a, b)
    return _finish("subtract", a.data - b.data, (a, b), lambda g: (g, -g))


def multiply(a: Tensor, b: Tensor) -> Tensor:
    _same_shape("multiply", a, b)
    a_data, b_data = a.data, b.data
    return _finish("multiply", a_data * b_data, (a, b), lambda g: (g * b_data, g * a_data))


def scale(a: Tensor, factor: float) -> Tensor:
    return _finish("scale", a.data * factor, (a,), lambda g: (g * factor,))


def absolute(a: Tensor) -> Tensor:
    sign = np.sign(a.data)
    return _finish("abs", np.abs(a.data), (a,), lambda g: (g * sign,))


def leaky_relu(a: Tensor, slope: float = LEAKY_SLOPE) -> Tensor:
    factor = np.where(a.data > 0, 1.0, slope)
    return _finish("leaky_relu", a.data * factor, (a,), lambda g: (g * factor,))


# ---------------------------------------------------------------------------
# Normalizations and reductions
# ---------------------------------------------------------------------------

def softmax(a: Tensor, axis: int = -1, mask: np.ndarray | None = None) -> Tensor:
    """
    Softmax along ``axis``. Entries where ``mask`` is False get weight 0
    and the rest renormalize over the kept subset.
    """
    axis = _axis("softmax", a, axis)
    logits = a.data
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != a.shape:
            raise ContractViolation(f"softmax: mask shape {mask.shape} != {a.shape}")
        if not np.all(mask.any(axis=axis)):
            raise ContractViolation("softmax: mask removes every entry of a slice")
        logits = np.where(mask, logits, -np.inf)
    shifted = logits - np.max(logits, axis=axis, keepdims=True)
    expd = np.exp(shifted)
    y = expd / np.sum(expd, axis=axis, keepdims=True)

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        return (y * (g - np.sum(g * y, axis=axis, keepdims=True)),)

    return _finish("softmax", y, (a,), backward)


def log_softmax(a: Tensor, axis: int = -1) -> Tensor:
    axis = _axis("log_softmax", a, axis)
    y = a.data - logsumexp(a.data, axis=axis, keepdims=True)
    probs = np.exp(y)

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        return (g - probs * np.sum(g, axis=axis, keepdims=True),)

    return _finish("log_softmax", y, (a,), backward)


def sum(a: Tensor, axis: int | None = None) -> Tensor:
    shape = a.shape
    if axis is not None:
        axis = _axis("sum", a, axis)

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        if axis is None:
            return (np.broadcast_to(g, shape).copy(),)
        return (np.broadcast_to(np.expand_dims(g, axis), shape).copy(),)

    return _finish("sum", np.sum(a.data, axis=axis), (a,), backward)


def mean(a: Tensor, axis: int | None = None) -> Tensor:
    shape = a.shape
    if axis is None:
        count = a.size
    else:
        axis = _axis("mean", a, axis)
        count = shape[axis]

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        if axis is None:
            return (np.broadcast_to(g / count, shape).copy(),)
        return (np.broadcast_to(np.expand_dims(g / count, axis), shape).copy(),)

    return _finish("mean", np.mean(a.data, axis=axis), (a,), backward)


def max(a: Tensor, axis: int) -> Tensor:
    """Maximum along ``axis``; the gradient flows to the first maximal entry."""
    axis = _axis("max", a, axis)
    arg = np.argmax(a.data, axis=axis)
    out = np.take_along_axis(a.data, np.expand_dims(arg, axis), axis=axis).squeeze(axis)
    shape = a.shape

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        grad = np.zeros(shape)
        np.put_along_axis(grad, np.expand_dims(arg, axis), np.expand_dims(g, axis), axis=axis)
        return (grad,)

    return _finish("max", out, (a,), backward)


def batch_norm(
    x: Tensor,
    gamma: Tensor,
    beta: Tensor,
    running_mean: np.ndarray,
    running_var: np.ndarray,
    training: bool,
    momentum: float = BN_MOMENTUM,
    eps: float = BN_EPS,
) -> Tensor:
    """
    Per-channel normalization of an (N, C) tensor over its rows.

    Training mode normalizes with batch statistics and updates the running
    buffers in place; eval mode uses the running buffers and is deterministic.
    """
    if x.ndim != 2 or gamma.shape != (x.shape[1],) or beta.shape != (x.shape[1],):
        raise ContractViolation(
            f"batch_norm: x {x.shape}, gamma {gamma.shape}, beta {beta.shape}"
        )
    data = x.data
    n = data.shape[0]
    if training:
        mu = data.mean(axis=0)
        var = data.var(axis=0)
        running_mean *= 1.0 - momentum
        running_mean += momentum * mu
        unbiased = var * n / (n - 1) if n > 1 else var
        running_var *= 1.0 - momentum
        running_var += momentum * unbiased
    else:
        mu = running_mean.copy()
        var = running_var.copy()
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (data - mu) * inv_std
    g_data = gamma.data
    out = xhat * g_data + beta.data

    def backward(g: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        dgamma = np.sum(g * xhat, axis=0)
        dbeta = np.sum(g, axis=0)
        dxhat = g * g_data
        if training:
            dx = inv_std / n * (
                n * dxhat - dxhat.sum(axis=0) - xhat * np.sum(dxhat * xhat, axis=0)
            )
        else:
            dx = dxhat * inv_std
        return dx, dgamma, dbeta

    return _finish("batch_norm", out, (x, gamma, beta), backward)


def dropout(
    x: Tensor,
    p: float,
    training: bool,
    rng: np.random.Generator | None = None,
) -> Tensor:
    """Inverted dropout. Identity (the same tensor) in eval mode or at p=0."""
    if not 0.0 <= p < 1.0:
        raise ContractViolation(f"dropout: p must be in [0, 1), got {p}")
    if not training or p == 0.0:
        return x
    if rng is None:
        raise ContractViolation("dropout: training mode needs a random generator")
    keep = (rng.random(x.shape) >= p) / (1.0 - p)
    return _finish("dropout", x.data * keep, (x,), lambda g: (g * keep,))


# ---------------------------------------------------------------------------
# Shape manipulation
# ---------------------------------------------------------------------------

def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    if not tensors:
        raise ContractViolation("concat: no tensors")
    axis = _axis("concat", tensors[0], axis)
    ref = tensors[0].shape
    for t in tensors[1:]:
        if t.ndim != len(ref) or any(
            t.shape[d] != ref[d] for d in range(len(ref)) if d != axis
        ):
            raise ContractViolation(f"concat: incompatible shapes {ref} and {t.shape}")
    splits = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def backward(g: np.ndarray) -> list[np.ndarray]:
        return np.split(g, splits, axis=axis)

    return _finish("concat", np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors), backward)


def index_select(a: Tensor, indices: np.ndarray, axis: int = 0) -> Tensor:
    """Gather slices along ``axis``; indices may repeat."""
    axis = _axis("index_select", a, axis)
    idx = np.asarray(indices, dtype=np.int64)
    extent = a.shape[axis]
    if idx.size and (idx.min() < 0 or idx.max() >= extent):
        raise ContractViolation(
            f"index_select: index out of bounds for axis {axis} with size {extent}"
        )
    shape = a.shape

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        grad = np.zeros(shape)
        moved = np.moveaxis(grad, axis, 0)
        np.add.at(moved, idx, np.moveaxis(g, axis, 0))
        return (grad,)

    return _finish("index_select", np.take(a.data, idx, axis=axis), (a,), backward)


def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    old = a.shape
    try:
        out = a.data.reshape(tuple(shape))
    except ValueError as exc:
        raise ContractViolation(f"reshape: {old} -> {tuple(shape)}: {exc}") from exc
    return _finish("reshape", out, (a,), lambda g: (g.reshape(old),))


def broadcast_to(a: Tensor, shape: Sequence[int]) -> Tensor:
    """
    Explicit numpy-style broadcast. The gradient sums over every expanded
    dimension.
    """
    shape = tuple(shape)
    try:
        out = np.broadcast_to(a.data, shape).copy()
    except ValueError as exc:
        raise ContractViolation(f"broadcast_to: {a.shape} -> {shape}: {exc}") from exc
    src = a.shape
    lead = len(shape) - len(src)

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        grad = g.sum(axis=tuple(range(lead))) if lead else g
        keep = tuple(d for d, extent in enumerate(src) if extent == 1 and grad.shape[d] != 1)
        if keep:
            grad = grad.sum(axis=keep, keepdims=True)
        return (grad,)

    return _finish("broadcast_to", out, (a,), backward)


def add_bias(x: Tensor, bias: Tensor) -> Tensor:
    """Add a (C,) bias to every row of an (N, C) tensor."""
    if x.ndim != 2 or bias.shape != (x.shape[1],):
        raise ContractViolation(f"add_bias: x {x.shape}, bias {bias.shape}")
    return add(x, broadcast_to(bias, x.shape))


def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    out = matmul(x, weight)
    return out if bias is None else add_bias(out, bias)
