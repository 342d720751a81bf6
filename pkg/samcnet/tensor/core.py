"""
Dense float64 tensors and the reverse-mode differentiation tape.

A Tape records every op whose inputs require gradients while it is the
active tape (``with Tape() as tape:``). Ops executed with no active tape
are plain value computations and record nothing, which is how evaluation
runs.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from samcnet.errors import ContractViolation

logger = logging.getLogger(__name__)

BackwardFn = Callable[[np.ndarray], Sequence["np.ndarray | None"]]


class Tensor:
    """
    An n-dimensional float64 array that can take part in a Tape.

    ``grad`` stays None until a backward pass reaches the tensor (or the
    optimizer zeroes it).
    """

    __slots__ = ("data", "requires_grad", "grad", "name", "tape")

    def __init__(
        self,
        data: np.ndarray | float | Sequence,
        requires_grad: bool = False,
        name: str = "",
    ) -> None:
        self.data = np.array(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self.name = name
        self.tape: Tape | None = None

    # --- array-like helpers ---

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return int(self.data.size)

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractViolation(f"item() on tensor of shape {self.shape}")
        return float(self.data.reshape(()))

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> Tensor:
        return Tensor(self.data.copy())

    def zero_grad(self) -> None:
        self.grad = np.zeros_like(self.data)

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}{label})"

    # --- operator sugar (delegates to samcnet.tensor.ops) ---

    def __add__(self, other: Tensor) -> Tensor:
        from samcnet.tensor import ops
        return ops.add(self, other)

    def __sub__(self, other: Tensor) -> Tensor:
        from samcnet.tensor import ops
        return ops.subtract(self, other)

    def __mul__(self, other: Tensor | float) -> Tensor:
        from samcnet.tensor import ops
        if isinstance(other, Tensor):
            return ops.multiply(self, other)
        return ops.scale(self, float(other))

    __rmul__ = __mul__

    def __neg__(self) -> Tensor:
        from samcnet.tensor import ops
        return ops.scale(self, -1.0)

    def __matmul__(self, other: Tensor) -> Tensor:
        from samcnet.tensor import ops
        return ops.matmul(self, other)


@dataclass
class TapeEntry:
    """One executed op: its inputs, its output, and its vector-Jacobian product."""
    op: str
    inputs: tuple[Tensor, ...]
    output: Tensor
    backward: BackwardFn


_ACTIVE_TAPES: list["Tape"] = []


def current_tape() -> Tape | None:
    """The innermost active tape, or None when nothing is being recorded."""
    return _ACTIVE_TAPES[-1] if _ACTIVE_TAPES else None


@dataclass
class Tape:
    """
    Ordered record of executed ops.

    Single-threaded: one training step owns one tape. Entering the tape
    makes it the recording target for all ops until exit.
    """

    entries: list[TapeEntry] = field(default_factory=list)

    def __enter__(self) -> Tape:
        _ACTIVE_TAPES.append(self)
        return self

    def __exit__(self, *exc: object) -> None:
        _ACTIVE_TAPES.remove(self)

    def __len__(self) -> int:
        return len(self.entries)

    def record(
        self,
        op: str,
        inputs: tuple[Tensor, ...],
        output: Tensor,
        backward: BackwardFn,
    ) -> None:
        output.tape = self
        self.entries.append(TapeEntry(op=op, inputs=inputs, output=output, backward=backward))

    def backward(self, loss: Tensor) -> None:
        """
        Run the chain rule over the entries in exact reverse order.

        Leaves (requires_grad tensors that no entry produced) accumulate
        into ``.grad``; intermediates only carry gradients transiently.
        """
        if loss.size != 1:
            raise ContractViolation(f"backward needs a scalar loss, got shape {loss.shape}")
        if not self.entries:
            raise ContractViolation("backward on an empty tape")

        produced = {id(e.output) for e in self.entries}
        grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
        leaves: dict[int, Tensor] = {}

        for entry in reversed(self.entries):
            out_grad = grads.pop(id(entry.output), None)
            if out_grad is None:
                continue
            in_grads = entry.backward(out_grad)
            for tensor, g in zip(entry.inputs, in_grads):
                if g is None or not tensor.requires_grad:
                    continue
                key = id(tensor)
                if key in grads:
                    grads[key] = grads[key] + g
                else:
                    grads[key] = np.asarray(g, dtype=np.float64)
                if key not in produced:
                    leaves[key] = tensor

        for key, leaf in leaves.items():
            g = grads[key].reshape(leaf.shape)
            leaf.grad = g.copy() if leaf.grad is None else leaf.grad + g

        logger.debug("backward: %d ops replayed, %d leaves updated", len(self.entries), len(leaves))


def backward(loss: Tensor) -> None:
    """Populate ``.grad`` of every requires_grad leaf reachable from ``loss``."""
    if loss.size != 1:
        raise ContractViolation(f"backward needs a scalar loss, got shape {loss.shape}")
    if loss.tape is None:
        raise ContractViolation("loss was not recorded on any tape")
    loss.tape.backward(loss)
