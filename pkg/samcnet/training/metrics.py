"""
Classification metrics shared by SAMCNet evaluation and the baselines.

Precision, recall and F1 are per-class values averaged with class-support
weights; a class that is never predicted contributes precision 0.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from sklearn.metrics import accuracy_score, confusion_matrix, precision_recall_fscore_support

from samcnet.data.pattern import Dataset, PointPattern
from samcnet.errors import ContractViolation

logger = logging.getLogger(__name__)

METRIC_KEYS = ("precision", "recall", "f1", "accuracy")


@dataclass(frozen=True)
class Metrics:
    """Weighted metrics plus the confusion matrix (rows = true class)."""

    precision: float
    recall: float
    f1: float
    accuracy: float
    per_sample_seconds: float = 0.0
    confusion: list[list[int]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    def without_timing(self) -> dict:
        out = self.to_dict()
        out.pop("per_sample_seconds")
        return out

    def write_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")
        logger.info("Metrics written to %s", path)


def compute_metrics(
    y_true: Sequence[int] | np.ndarray,
    y_pred: Sequence[int] | np.ndarray,
    num_classes: int,
    per_sample_seconds: float = 0.0,
) -> Metrics:
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape or y_true.size == 0:
        raise ContractViolation(f"need equal, non-empty label arrays; got {y_true.shape} and {y_pred.shape}")
    labels = list(range(num_classes))
    precision, recall, f1, _ = precision_recall_fscore_support(
        y_true, y_pred, labels=labels, average="weighted", zero_division=0,
    )
    return Metrics(
        precision=float(precision),
        recall=float(recall),
        f1=float(f1),
        accuracy=float(accuracy_score(y_true, y_pred)),
        per_sample_seconds=float(per_sample_seconds),
        confusion=confusion_matrix(y_true, y_pred, labels=labels).tolist(),
    )


def metrics_from_confusion(confusion: np.ndarray) -> Metrics:
    """Expand a confusion matrix back into label pairs and score them."""
    confusion = np.asarray(confusion, dtype=np.int64)
    y_true, y_pred = [], []
    for t in range(confusion.shape[0]):
        for p in range(confusion.shape[1]):
            y_true.extend([t] * int(confusion[t, p]))
            y_pred.extend([p] * int(confusion[t, p]))
    return compute_metrics(y_true, y_pred, confusion.shape[0])


def evaluate_predictor(
    predict: Callable[[PointPattern], int],
    dataset: Dataset,
) -> Metrics:
    """Run ``predict`` on every pattern and time each call."""
    if len(dataset) == 0:
        raise ContractViolation("cannot evaluate on an empty dataset")
    preds = np.empty(len(dataset), dtype=np.int64)
    elapsed = 0.0
    for i, pattern in enumerate(dataset.patterns):
        start = time.perf_counter()
        preds[i] = predict(pattern)
        elapsed += time.perf_counter() - start
    metrics = compute_metrics(dataset.labels, preds, dataset.num_classes, elapsed / len(dataset))
    logger.info(
        "Evaluated %d patterns: accuracy=%.4f f1=%.4f (%.4fs/sample)",
        len(dataset), metrics.accuracy, metrics.f1, metrics.per_sample_seconds,
    )
    return metrics
