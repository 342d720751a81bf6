"""Classification loss."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from samcnet.errors import ContractViolation
from samcnet.tensor import ops
from samcnet.tensor.core import Tensor


def cross_entropy(logits: Tensor, labels: Sequence[int] | np.ndarray) -> Tensor:
    """
    Mean negative log-softmax probability of the true class.

    ``logits`` is (N, C); ``labels`` holds N class ids in [0, C).
    """
    if logits.ndim != 2:
        raise ContractViolation(f"cross_entropy: logits must be (N, C), got {logits.shape}")
    n, c = logits.shape
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (n,):
        raise ContractViolation(f"cross_entropy: {labels.shape[0] if labels.ndim else 0} labels for {n} rows")
    if labels.size and (labels.min() < 0 or labels.max() >= c):
        raise ContractViolation(f"cross_entropy: label out of range [0, {c})")

    one_hot = np.zeros((n, c))
    one_hot[np.arange(n), labels] = 1.0
    picked = ops.multiply(ops.log_softmax(logits, axis=1), Tensor(one_hot))
    return ops.scale(ops.sum(picked), -1.0 / n)
