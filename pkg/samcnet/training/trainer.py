"""
Minibatch Adam training and evaluation of SAMCNet.

Every epoch resamples each training pattern to ``num_points`` points and
shuffles the pattern order, both from the epoch's own random stream. The
parameters with the best validation accuracy seen so far are retained and
restored at the end.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from samcnet.config import ModelConfig, TrainConfig
from samcnet.data.pattern import Dataset, PointPattern
from samcnet.data.transforms import report_undersized, sample_points
from samcnet.errors import ContractViolation
from samcnet.model.network import ModelParams, forward
from samcnet.tensor.core import Tape, backward
from samcnet.tensor.loss import cross_entropy
from samcnet.tensor.optim import Adam, AdamState
from samcnet.tensor.rng import component_rng
from samcnet.training.metrics import Metrics, evaluate_predictor

logger = logging.getLogger(__name__)

HISTORY_COLUMNS = ["epoch", "train_loss", "val_accuracy"]
EVAL_SAMPLE_SEED = 0


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_accuracy: float


@dataclass
class TrainingHistory:
    """Per-epoch loss and validation accuracy; ``best_epoch`` is the retained one."""

    records: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [(r.epoch, r.train_loss, r.val_accuracy) for r in self.records],
            columns=HISTORY_COLUMNS,
        )

    def write_csv(self, path: str | Path) -> None:
        self.to_frame().to_csv(path, index=False, lineterminator="\n", float_format="%.17g")
        logger.info("History written to %s", path)


def make_batches(order: np.ndarray, batch_size: int) -> list[np.ndarray]:
    """Consecutive slices of ``order``; a trailing single-pattern batch joins the one before it."""
    batches = [order[i:i + batch_size] for i in range(0, order.size, batch_size)]
    if len(batches) > 1 and batches[-1].size == 1:
        batches[-2] = np.concatenate([batches[-2], batches.pop()])
    return batches


def _snapshot(params: ModelParams) -> dict[str, np.ndarray]:
    arrays = {name: t.data.copy() for name, t in params.named_parameters().items()}
    arrays.update({name: b.copy() for name, b in params.named_buffers().items()})
    return arrays


def _restore(params: ModelParams, snapshot: dict[str, np.ndarray]) -> None:
    for name, t in params.named_parameters().items():
        t.data[...] = snapshot[name]
    for name, b in params.named_buffers().items():
        b[...] = snapshot[name]


def predict_class(params: ModelParams, pattern: PointPattern, seed: int = EVAL_SAMPLE_SEED) -> int:
    """Eval-mode prediction on ``pattern`` resampled to the model's point count."""
    sampled = sample_points(pattern, params.config.num_points, seed)
    logits = forward(params, [sampled]).data[0]
    return int(np.argmax(logits))


def accuracy(params: ModelParams, dataset: Dataset, seed: int = EVAL_SAMPLE_SEED) -> float:
    if len(dataset) == 0:
        return float("nan")
    preds = np.array([predict_class(params, p, seed) for p in dataset.patterns])
    return float(np.mean(preds == dataset.labels))


def train(
    train_set: Dataset,
    val_set: Dataset,
    model_config: ModelConfig,
    train_config: TrainConfig,
) -> tuple[ModelParams, TrainingHistory]:
    """Fit a fresh model; returns the best-validation parameters and the history."""
    if len(train_set) == 0:
        raise ContractViolation("cannot train on an empty training set")
    seed = train_config.seed
    params = ModelParams.initialize(model_config, train_set.num_categories, train_set.num_classes, seed)
    optimizer = Adam(
        params.named_parameters(),
        AdamState(lr=train_config.lr, beta1=train_config.beta1, beta2=train_config.beta2, eps=train_config.eps),
    )
    history = TrainingHistory()
    best_accuracy = -np.inf
    best = _snapshot(params)
    labels = train_set.labels

    logger.info(
        "Training on %d patterns (%d validation) for %d epochs, batch %d",
        len(train_set), len(val_set), train_config.epochs, train_config.batch_size,
    )
    report_undersized(train_set, model_config.num_points)
    report_undersized(val_set, model_config.num_points)
    for epoch in range(1, train_config.epochs + 1):
        rng = component_rng(seed, "epoch", epoch)
        sample_seed = int(rng.integers(0, 2**63 - 1))
        sampled = [sample_points(p, model_config.num_points, sample_seed) for p in train_set.patterns]
        total_loss = 0.0
        for batch_idx in make_batches(rng.permutation(len(sampled)), train_config.batch_size):
            optimizer.zero_grad()
            with Tape():
                logits = forward(params, [sampled[i] for i in batch_idx], training=True, rng=rng)
                loss = cross_entropy(logits, labels[batch_idx])
            backward(loss)
            optimizer.step()
            total_loss += loss.item() * batch_idx.size
        train_loss = total_loss / len(sampled)

        val_accuracy = accuracy(params, val_set)
        history.records.append(EpochRecord(epoch, train_loss, val_accuracy))
        score = val_accuracy if len(val_set) else -train_loss
        if score > best_accuracy:
            best_accuracy = score
            best = _snapshot(params)
            history.best_epoch = epoch
        logger.info("Epoch %d/%d: train_loss=%.5f val_accuracy=%.4f", epoch, train_config.epochs, train_loss, val_accuracy)

    _restore(params, best)
    logger.info("Restored parameters from epoch %d", history.best_epoch)
    return params, history


def evaluate(test_set: Dataset, params: ModelParams, seed: int = EVAL_SAMPLE_SEED) -> Metrics:
    """Eval-mode metrics with per-sample wall-clock inference time."""
    report_undersized(test_set, params.config.num_points)
    return evaluate_predictor(lambda p: predict_class(params, p, seed), test_set)
