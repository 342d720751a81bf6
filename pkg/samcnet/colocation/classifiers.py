"""
Baseline classifiers over hand-constructed co-location features.

All three share the BaselineClassifier interface and are built through
``create_classifier`` by name:

  dt  depth-2 Gini decision tree
  rf  50 bootstrapped depth-2 trees, sqrt(F) features per split, majority vote
  nn  fully connected network (4 leaky-relu hidden layers of 2048 units)
      trained with Adam on the tensor core
"""

from __future__ import annotations

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np
from sklearn.ensemble import RandomForestClassifier
from sklearn.preprocessing import StandardScaler
from sklearn.tree import DecisionTreeClassifier

from samcnet.errors import ContractViolation
from samcnet.tensor import ops
from samcnet.tensor.core import Tape, Tensor, backward
from samcnet.tensor.loss import cross_entropy
from samcnet.tensor.optim import Adam, AdamState
from samcnet.tensor.rng import component_rng

logger = logging.getLogger(__name__)

CLASSIFIERS = ("dt", "rf", "nn")


def _check_training_data(features: np.ndarray, labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if features.ndim != 2 or features.shape[0] != labels.shape[0]:
        raise ContractViolation(f"features {features.shape} do not match {labels.shape[0]} labels")
    if np.unique(labels).size < 2:
        raise ContractViolation("training labels contain a single class; refusing to fit")
    return features, labels


class BaselineClassifier(ABC):
    """Fit on (samples, features) arrays; predict class ids."""

    name: str = ""

    @abstractmethod
    def fit(self, features: np.ndarray, labels: np.ndarray) -> BaselineClassifier:
        ...

    @abstractmethod
    def predict(self, features: np.ndarray) -> np.ndarray:
        ...


# ---------------------------------------------------------------------------
# Trees
# ---------------------------------------------------------------------------

class DepthTwoTree(BaselineClassifier):
    """Axis-aligned Gini tree limited to depth 2."""

    name = "dt"

    def __init__(self, seed: int = 0) -> None:
        self.seed = seed
        self.model = DecisionTreeClassifier(criterion="gini", max_depth=2, random_state=seed)

    def fit(self, features: np.ndarray, labels: np.ndarray) -> DepthTwoTree:
        features, labels = _check_training_data(features, labels)
        self.model.fit(features, labels)
        logger.debug("Fitted depth-%d tree on %d samples", self.model.get_depth(), features.shape[0])
        return self

    def predict_proba(self, features: np.ndarray) -> np.ndarray:
        return self.model.predict_proba(np.asarray(features, dtype=np.float64))

    def predict(self, features: np.ndarray) -> np.ndarray:
        return self.model.predict(np.asarray(features, dtype=np.float64)).astype(np.int64)


class BaggedForest(BaselineClassifier):
    """Bootstrapped depth-2 trees with sqrt(F) feature subsampling; hard majority vote."""

    name = "rf"

    def __init__(self, n_trees: int = 50, seed: int = 0) -> None:
        self.seed = seed
        self.model = RandomForestClassifier(
            n_estimators=n_trees,
            criterion="gini",
            max_depth=2,
            max_features="sqrt",
            bootstrap=True,
            random_state=seed,
        )

    def fit(self, features: np.ndarray, labels: np.ndarray) -> BaggedForest:
        features, labels = _check_training_data(features, labels)
        self.model.fit(features, labels)
        logger.debug("Fitted forest of %d trees on %d samples", len(self.model.estimators_), features.shape[0])
        return self

    def tree_votes(self, features: np.ndarray) -> np.ndarray:
        """(trees, samples) class ids predicted by each tree."""
        features = np.asarray(features, dtype=np.float64)
        classes = self.model.classes_
        return np.stack([classes[tree.predict(features).astype(np.int64)] for tree in self.model.estimators_])

    def predict(self, features: np.ndarray) -> np.ndarray:
        votes = self.tree_votes(features)
        classes = self.model.classes_
        counts = np.stack([(votes == c).sum(axis=0) for c in classes], axis=1)
        # argmax keeps the lowest class id on ties
        return classes[np.argmax(counts, axis=1)].astype(np.int64)


# ---------------------------------------------------------------------------
# Fully connected network
# ---------------------------------------------------------------------------

@dataclass
class MlpSettings:
    hidden_layers: int = 4
    width: int = 2048
    epochs: int = 200
    batch_size: int = 32
    lr: float = 1e-3


class MlpClassifier(BaselineClassifier):
    """Leaky-relu MLP on z-scored inputs, trained with Adam and cross-entropy."""

    name = "nn"

    def __init__(self, settings: MlpSettings | None = None, seed: int = 0) -> None:
        self.settings = settings or MlpSettings()
        self.seed = seed
        self.scaler = StandardScaler()
        self.weights: list[Tensor] = []
        self.biases: list[Tensor] = []

    def _init(self, in_width: int, num_classes: int) -> None:
        rng = component_rng(self.seed, "mlp", "init")
        widths = [in_width] + [self.settings.width] * self.settings.hidden_layers + [num_classes]
        self.weights, self.biases = [], []
        for i, (fan_in, fan_out) in enumerate(zip(widths, widths[1:])):
            bound = 1.0 / np.sqrt(fan_in)
            self.weights.append(Tensor(rng.uniform(-bound, bound, (fan_in, fan_out)), requires_grad=True, name=f"mlp{i}.weight"))
            self.biases.append(Tensor(rng.uniform(-bound, bound, fan_out), requires_grad=True, name=f"mlp{i}.bias"))

    def _logits(self, x: np.ndarray) -> Tensor:
        h = Tensor(x)
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = ops.linear(h, w, b)
            if i < last:
                h = ops.leaky_relu(h)
        return h

    def fit(self, features: np.ndarray, labels: np.ndarray) -> MlpClassifier:
        features, labels = _check_training_data(features, labels)
        x = self.scaler.fit_transform(features)
        self._init(x.shape[1], int(labels.max()) + 1)
        params = {w.name: w for w in self.weights} | {b.name: b for b in self.biases}
        optimizer = Adam(params, AdamState(lr=self.settings.lr))
        rng = component_rng(self.seed, "mlp", "batches")
        s = self.settings
        for epoch in range(1, s.epochs + 1):
            order = rng.permutation(x.shape[0])
            total = 0.0
            for start in range(0, order.size, s.batch_size):
                idx = order[start:start + s.batch_size]
                optimizer.zero_grad()
                with Tape():
                    loss = cross_entropy(self._logits(x[idx]), labels[idx])
                backward(loss)
                optimizer.step()
                total += loss.item() * idx.size
            logger.debug("MLP epoch %d/%d: loss=%.5f", epoch, s.epochs, total / order.size)
        return self

    def predict_proba(self, features: np.ndarray) -> np.ndarray:
        if not self.weights:
            raise ContractViolation("MLP used before fit")
        logits = self._logits(self.scaler.transform(np.asarray(features, dtype=np.float64))).data
        shifted = np.exp(logits - logits.max(axis=1, keepdims=True))
        return shifted / shifted.sum(axis=1, keepdims=True)

    def predict(self, features: np.ndarray) -> np.ndarray:
        return np.argmax(self.predict_proba(features), axis=1).astype(np.int64)


def create_classifier(name: str, seed: int = 0, mlp: MlpSettings | None = None) -> BaselineClassifier:
    """Factory: the baseline classifier registered under ``name``."""
    if name == "dt":
        return DepthTwoTree(seed=seed)
    if name == "rf":
        return BaggedForest(seed=seed)
    if name == "nn":
        return MlpClassifier(settings=mlp, seed=seed)
    raise ContractViolation(f"unknown classifier {name!r}; expected one of {CLASSIFIERS}")


def fit_tree(features: np.ndarray, labels: np.ndarray, seed: int = 0) -> DepthTwoTree:
    return DepthTwoTree(seed=seed).fit(features, labels)


def fit_forest(features: np.ndarray, labels: np.ndarray, seed: int = 0, n_trees: int = 50) -> BaggedForest:
    return BaggedForest(n_trees=n_trees, seed=seed).fit(features, labels)


def fit_mlp(
    features: np.ndarray,
    labels: np.ndarray,
    seed: int = 0,
    settings: MlpSettings | None = None,
) -> MlpClassifier:
    return MlpClassifier(settings=settings, seed=seed).fit(features, labels)


def predict(model: BaselineClassifier, features: np.ndarray) -> np.ndarray:
    return model.predict(features)
