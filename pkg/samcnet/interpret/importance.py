"""Category-pair importance read off the learned association vectors."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd

from samcnet.data.pattern import CategoryVocabulary
from samcnet.errors import ContractViolation
from samcnet.model.layers import pair_index
from samcnet.model.network import ModelParams

logger = logging.getLogger(__name__)

NORMS = ("l2", "l1")
PAIR_IMPORTANCE_COLUMNS = ["layer", "cat_a", "cat_b", "importance"]


@dataclass(frozen=True, eq=False)
class PairImportanceMatrix:
    """Symmetric g x g matrix of importances in [0, 1] for one layer."""
    layer: int
    matrix: np.ndarray


def pair_importance(params: ModelParams, layer: int, norm: str = "l2") -> PairImportanceMatrix:
    """
    Norm of each pair's association vector, averaged over heads and
    divided by the largest entry.
    """
    if norm not in NORMS:
        raise ContractViolation(f"unknown norm {norm!r}; expected one of {NORMS}")
    tables = params.pair_tables(layer)
    order = 2 if norm == "l2" else 1
    per_head = [np.linalg.norm(t.vectors.data, ord=order, axis=1) for t in tables]
    magnitudes = np.mean(per_head, axis=0)

    g = params.num_categories
    a, b = np.meshgrid(np.arange(g), np.arange(g), indexing="ij")
    matrix = magnitudes[pair_index(a, b)]
    peak = matrix.max()
    if peak > 0:
        matrix = matrix / peak
    else:
        logger.warning("Layer %d association vectors are all zero; importances left at 0", layer)
    matrix.setflags(write=False)
    return PairImportanceMatrix(layer, matrix)


def pair_importance_frame(params: ModelParams, vocabulary: CategoryVocabulary, norm: str = "l2") -> pd.DataFrame:
    """``layer,cat_a,cat_b,importance`` for every layer and unordered pair (a <= b)."""
    rows = []
    for layer in range(len(params.layers)):
        matrix = pair_importance(params, layer, norm).matrix
        for a in range(len(vocabulary)):
            for b in range(a, len(vocabulary)):
                rows.append((layer, vocabulary.names[a], vocabulary.names[b], float(matrix[a, b])))
    return pd.DataFrame(rows, columns=PAIR_IMPORTANCE_COLUMNS)
