"""
N-way spatial relationships and their ranking by permutation importance.

A signature is a center category together with the SET of distinct
categories among its neighbors in the last layer's graph. Each pattern
is summarized, per signature, by the mean last-layer vertex embedding of
the points carrying it. A logistic readout is fit on those blocks; shuffling
one block across held-out samples and measuring the accuracy drop ranks
the signatures.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import pandas as pd
from sklearn.preprocessing import StandardScaler

from samcnet.data.pattern import CategoryVocabulary, Dataset
from samcnet.data.transforms import report_undersized, sample_points
from samcnet.errors import ContractViolation
from samcnet.model.network import ModelParams, PatternBatch, forward_details
from samcnet.tensor import ops
from samcnet.tensor.core import Tape, Tensor, backward
from samcnet.tensor.loss import cross_entropy
from samcnet.tensor.optim import Adam, AdamState
from samcnet.tensor.rng import component_rng
from samcnet.training.trainer import EVAL_SAMPLE_SEED

logger = logging.getLogger(__name__)

GRAPH_SOURCES = ("feature", "coordinate")
RELATIONSHIP_COLUMNS = ["rank", "center", "neighbors", "accuracy_drop"]
MIN_SAMPLES = 10
READOUT_NAME = "logistic"


@dataclass(frozen=True, order=True)
class NWaySignature:
    center: int
    neighbors: tuple[int, ...]     # sorted distinct category ids

    def __post_init__(self) -> None:
        if not self.neighbors:
            raise ContractViolation("signature needs at least one neighbor category")
        object.__setattr__(self, "neighbors", tuple(sorted(set(int(c) for c in self.neighbors))))

    def contains(self, categories: Sequence[int]) -> bool:
        """True when the center plus neighbors cover every id in ``categories``."""
        return set(categories) <= {self.center, *self.neighbors}

    def describe(self, vocabulary: CategoryVocabulary) -> tuple[str, str]:
        return vocabulary.names[self.center], "+".join(vocabulary.names[c] for c in self.neighbors)


@dataclass(frozen=True)
class RankedRelationship:
    signature: NWaySignature
    accuracy_drop: float


@dataclass
class RelationshipRanking:
    """Signatures sorted by descending accuracy drop."""

    entries: list[RankedRelationship] = field(default_factory=list)
    baseline_accuracy: float = 0.0

    def signatures(self) -> list[NWaySignature]:
        return [e.signature for e in self.entries]

    def to_frame(self, vocabulary: CategoryVocabulary, top: int | None = None) -> pd.DataFrame:
        entries = self.entries if top is None else self.entries[:top]
        rows = []
        for rank, entry in enumerate(entries, start=1):
            center, neighbors = entry.signature.describe(vocabulary)
            rows.append((rank, center, neighbors, entry.accuracy_drop))
        return pd.DataFrame(rows, columns=RELATIONSHIP_COLUMNS)


# ---------------------------------------------------------------------------
# Signature features
# ---------------------------------------------------------------------------

def signatures_of(categories: np.ndarray, neighbor_indices: np.ndarray) -> list[NWaySignature]:
    """One signature per center row."""
    return [
        NWaySignature(int(categories[i]), tuple(int(c) for c in categories[row]))
        for i, row in enumerate(neighbor_indices)
    ]


def nway_features(
    params: ModelParams,
    dataset: Dataset,
    graph_source: str = "feature",
    seed: int = EVAL_SAMPLE_SEED,
) -> list[dict[NWaySignature, np.ndarray]]:
    """Per pattern: signature -> mean last-layer embedding of its member points."""
    if graph_source not in GRAPH_SOURCES:
        raise ContractViolation(f"graph_source must be one of {GRAPH_SOURCES}, got {graph_source!r}")
    report_undersized(dataset, params.config.num_points)
    out = []
    for pattern in dataset.patterns:
        sampled = sample_points(pattern, params.config.num_points, seed)
        batch = PatternBatch.from_patterns([sampled], params.config.k)
        trace = forward_details(params, batch)
        graph = trace.graphs[-1] if graph_source == "feature" else trace.graphs[0]
        embedding = trace.embeddings[-1].data
        groups: dict[NWaySignature, list[int]] = {}
        for i, sig in enumerate(signatures_of(batch.categories, graph.indices)):
            groups.setdefault(sig, []).append(i)
        out.append({sig: embedding[rows].mean(axis=0) for sig, rows in groups.items()})
        logger.debug("Pattern %s: %d signatures", pattern.sample_id, len(groups))
    return out


def stack_features(
    feature_maps: Sequence[dict[NWaySignature, np.ndarray]],
) -> tuple[list[NWaySignature], np.ndarray]:
    """All signatures (sorted) and a (samples, signatures, width) array; absent ones are zero."""
    signatures = sorted({sig for fm in feature_maps for sig in fm})
    if not signatures:
        raise ContractViolation("no signatures to stack")
    width = next(v.shape[0] for fm in feature_maps for v in fm.values())
    blocks = np.zeros((len(feature_maps), len(signatures), width))
    col = {sig: j for j, sig in enumerate(signatures)}
    for i, fm in enumerate(feature_maps):
        for sig, vec in fm.items():
            blocks[i, col[sig]] = vec
    return signatures, blocks


# ---------------------------------------------------------------------------
# Logistic readout
# ---------------------------------------------------------------------------

@dataclass
class LogisticReadout:
    """Single linear layer + softmax, trained full-batch with Adam on z-scored inputs."""

    steps: int = 300
    lr: float = 0.05
    seed: int = 0
    scaler: StandardScaler = field(default_factory=StandardScaler)
    weight: Tensor | None = None
    bias: Tensor | None = None

    def fit(self, x: np.ndarray, y: np.ndarray) -> LogisticReadout:
        x = self.scaler.fit_transform(x)
        rng = component_rng(self.seed, "readout", "init")
        num_classes = int(y.max()) + 1
        bound = 1.0 / np.sqrt(x.shape[1])
        self.weight = Tensor(rng.uniform(-bound, bound, (x.shape[1], num_classes)), requires_grad=True, name="readout.weight")
        self.bias = Tensor(np.zeros(num_classes), requires_grad=True, name="readout.bias")
        optimizer = Adam({"weight": self.weight, "bias": self.bias}, AdamState(lr=self.lr))
        inputs = Tensor(x)
        for _ in range(self.steps):
            optimizer.zero_grad()
            with Tape():
                loss = cross_entropy(ops.linear(inputs, self.weight, self.bias), y)
            backward(loss)
            optimizer.step()
        return self

    def predict(self, x: np.ndarray) -> np.ndarray:
        if self.weight is None:
            raise ContractViolation("readout used before fit")
        logits = ops.linear(Tensor(self.scaler.transform(x)), self.weight, self.bias).data
        return np.argmax(logits, axis=1)

    def accuracy(self, x: np.ndarray, y: np.ndarray) -> float:
        return float(np.mean(self.predict(x) == y))


def stratified_holdout(labels: np.ndarray, fraction: float, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """(train rows, held-out rows); every class keeps at least one row on each side."""
    train, held = [], []
    for c in np.unique(labels):
        members = rng.permutation(np.flatnonzero(labels == c))
        n_held = min(max(1, int(np.floor(members.size * fraction + 0.5))), members.size - 1)
        held.extend(members[:n_held])
        train.extend(members[n_held:])
    return np.sort(np.array(train, dtype=np.int64)), np.sort(np.array(held, dtype=np.int64))


def block_drop(
    readout: LogisticReadout,
    x: np.ndarray,
    y: np.ndarray,
    columns: slice,
    permutation: np.ndarray,
) -> float:
    """Accuracy lost when the ``columns`` block is reordered across rows by ``permutation``."""
    shuffled = x.copy()
    shuffled[:, columns] = x[permutation][:, columns]
    return readout.accuracy(x, y) - readout.accuracy(shuffled, y)


def rank_by_permutation(
    feature_maps: Sequence[dict[NWaySignature, np.ndarray]],
    labels: Sequence[int] | np.ndarray,
    seed: int,
    repetitions: int = 10,
    holdout_fraction: float = 0.3,
) -> RelationshipRanking:
    """Rank signatures by the mean held-out accuracy drop when their block is shuffled."""
    labels = np.asarray(labels, dtype=np.int64)
    if len(feature_maps) != labels.size:
        raise ContractViolation(f"{len(feature_maps)} feature maps for {labels.size} labels")
    if labels.size < MIN_SAMPLES:
        raise ContractViolation(f"permutation ranking needs at least {MIN_SAMPLES} samples, got {labels.size}")
    if np.unique(labels).size < 2:
        raise ContractViolation("permutation ranking needs at least two classes")
    counts = np.bincount(labels)
    if counts[counts > 0].min() < 2:
        raise ContractViolation("every class needs at least two samples for a held-out split")

    signatures, blocks = stack_features(feature_maps)
    n, s, width = blocks.shape
    x = blocks.reshape(n, s * width)
    train_rows, held_rows = stratified_holdout(labels, holdout_fraction, component_rng(seed, "readout", "split"))
    readout = LogisticReadout(seed=seed).fit(x[train_rows], labels[train_rows])
    x_held, y_held = x[held_rows], labels[held_rows]
    baseline = readout.accuracy(x_held, y_held)

    entries = []
    for j, sig in enumerate(signatures):
        rng = component_rng(seed, "readout", "shuffle", j)
        columns = slice(j * width, (j + 1) * width)
        drops = [block_drop(readout, x_held, y_held, columns, rng.permutation(held_rows.size)) for _ in range(repetitions)]
        entries.append(RankedRelationship(sig, float(np.mean(drops))))
    entries.sort(key=lambda e: -e.accuracy_drop)
    logger.info(
        "Ranked %d signatures with a %s readout (held-out accuracy %.3f, %d repetitions)",
        len(entries), READOUT_NAME, baseline, repetitions,
    )
    return RelationshipRanking(entries, baseline)
