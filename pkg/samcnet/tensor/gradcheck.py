"""Central finite-difference gradient checking."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from samcnet.tensor.core import Tape, Tensor, backward


def numerical_gradient(
    fn: Callable[[], Tensor],
    tensor: Tensor,
    h: float = 1e-5,
    indices: np.ndarray | None = None,
) -> np.ndarray:
    """
    d fn() / d tensor by central differences, perturbing ``tensor.data`` in
    place. With ``indices`` only those flat entries are evaluated (the rest
    stay 0).
    """
    grad = np.zeros_like(tensor.data)
    flat = tensor.data.reshape(-1)
    out = grad.reshape(-1)
    for i in range(flat.size) if indices is None else indices:
        original = flat[i]
        flat[i] = original + h
        plus = fn().item()
        flat[i] = original - h
        minus = fn().item()
        flat[i] = original
        out[i] = (plus - minus) / (2.0 * h)
    return grad


def analytic_gradients(fn: Callable[[], Tensor], tensors: Sequence[Tensor]) -> list[np.ndarray]:
    for t in tensors:
        t.grad = None
    with Tape():
        loss = fn()
    backward(loss)
    return [np.zeros_like(t.data) if t.grad is None else t.grad.copy() for t in tensors]


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-8) -> float:
    """max |a - n| / max(|a| + |n|, floor), elementwise."""
    denom = np.maximum(np.abs(analytic) + np.abs(numeric), floor)
    return float(np.max(np.abs(analytic - numeric) / denom)) if analytic.size else 0.0


def gradcheck(
    fn: Callable[[], Tensor],
    tensors: Sequence[Tensor],
    h: float = 1e-5,
    tolerance: float = 1e-4,
    floor: float = 1e-6,
    max_entries: int | None = None,
    rng: np.random.Generator | None = None,
) -> float:
    """
    Compare tape gradients of the scalar ``fn()`` with central differences.

    ``max_entries`` caps the entries checked per tensor (drawn with ``rng``).
    Returns the worst relative error; raises AssertionError above ``tolerance``.
    """
    analytic = analytic_gradients(fn, tensors)
    rng = rng or np.random.default_rng(0)
    worst = 0.0
    for t, a in zip(tensors, analytic):
        idx = np.arange(t.size)
        if max_entries is not None and t.size > max_entries:
            idx = np.sort(rng.choice(t.size, size=max_entries, replace=False))
        numeric = numerical_gradient(fn, t, h, idx)
        err = relative_error(a.reshape(-1)[idx], numeric.reshape(-1)[idx], floor)
        if err > worst:
            worst = err
        if err > tolerance:
            name = t.name or repr(t)
            raise AssertionError(f"gradient mismatch in {name}: relative error {err:.3e} > {tolerance:.1e}")
    return worst
