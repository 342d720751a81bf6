"""
Adam optimizer. A configured "momentum" is beta1.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from samcnet.errors import ContractViolation
from samcnet.tensor.core import Tensor

logger = logging.getLogger(__name__)


@dataclass
class AdamState:
    """Moment buffers keyed by parameter name, plus the step counter."""
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(params: dict[str, Tensor], state: AdamState) -> None:
    """
    Apply one bias-corrected Adam update to every parameter, in place.

    Parameter arrays are updated in place so that any view or alias of
    them (e.g. pair-table lookups) keeps seeing the live values.
    """
    for name, p in params.items():
        if p.grad is None:
            raise ContractViolation(f"adam_step: parameter {name!r} has no gradient")
        if p.grad.shape != p.shape:
            raise ContractViolation(
                f"adam_step: gradient shape {p.grad.shape} != parameter shape {p.shape} for {name!r}"
            )

    state.step += 1
    t = state.step
    correction1 = 1.0 - state.beta1 ** t
    correction2 = 1.0 - state.beta2 ** t

    for name, p in params.items():
        g = p.grad
        m = state.m.setdefault(name, np.zeros_like(p.data))
        v = state.v.setdefault(name, np.zeros_like(p.data))
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p.data -= state.lr * (m / correction1) / (np.sqrt(v / correction2) + state.eps)


@dataclass
class Adam:
    """Owns a parameter set and its AdamState."""

    params: dict[str, Tensor]
    state: AdamState = field(default_factory=AdamState)

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.zero_grad()

    def step(self) -> None:
        adam_step(self.params, self.state)
