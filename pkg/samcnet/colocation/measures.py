"""
Spatial co-location measures: cross-K, participation ratio and index.

Two points are neighbors at threshold h when their Euclidean distance is
at most h (inclusive). An instance of a category subset C is a clique:
one point per category of C with every pair of them neighbors.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np
import pandas as pd
from scipy.spatial import cKDTree

from samcnet.data.pattern import Dataset, PointPattern
from samcnet.errors import ContractViolation

logger = logging.getLogger(__name__)

MEASURES = ("pi", "crossk")
DEFAULT_THRESHOLDS = (50.0,)

# Ball queries are widened by this factor, then filtered with the exact
# d <= h predicate so the tree path and the brute-force path agree.
_QUERY_SLACK = 1e-9


@dataclass(frozen=True)
class ThresholdSet:
    """Neighborhood distance thresholds H, strictly increasing and positive (px)."""

    values: tuple[float, ...] = DEFAULT_THRESHOLDS

    def __post_init__(self) -> None:
        values = tuple(float(h) for h in self.values)
        if not values:
            raise ContractViolation("threshold set is empty")
        if values[0] <= 0 or any(b <= a for a, b in zip(values, values[1:])):
            raise ContractViolation(f"thresholds must be positive and strictly increasing: {values}")
        object.__setattr__(self, "values", values)

    def __iter__(self):
        return iter(self.values)

    def __len__(self) -> int:
        return len(self.values)


# ---------------------------------------------------------------------------
# Neighbor pairs
# ---------------------------------------------------------------------------

def neighbor_pairs(a: np.ndarray, b: np.ndarray, h: float) -> np.ndarray:
    """All (row of a, row of b) with distance <= h, as an (m, 2) array sorted row-major."""
    a = np.asarray(a, dtype=np.float64).reshape(-1, 2)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 2)
    if a.shape[0] == 0 or b.shape[0] == 0:
        return np.empty((0, 2), dtype=np.int64)
    hits = cKDTree(b).query_ball_point(a, r=h * (1.0 + _QUERY_SLACK) + _QUERY_SLACK)
    rows = []
    for i, cand in enumerate(hits):
        if not cand:
            continue
        cand = np.sort(np.asarray(cand, dtype=np.int64))
        d = np.sqrt(np.sum((b[cand] - a[i]) ** 2, axis=1))
        keep = cand[d <= h]
        rows.extend((i, int(j)) for j in keep)
    return np.array(rows, dtype=np.int64).reshape(-1, 2)


def brute_force_pairs(a: np.ndarray, b: np.ndarray, h: float) -> np.ndarray:
    """O(|a||b|) reference for ``neighbor_pairs``."""
    a = np.asarray(a, dtype=np.float64).reshape(-1, 2)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 2)
    d = np.sqrt(np.sum((a[:, None, :] - b[None, :, :]) ** 2, axis=2))
    return np.argwhere(d <= h).astype(np.int64).reshape(-1, 2)


def _points(pattern: PointPattern, category: int) -> np.ndarray:
    return pattern.coords[pattern.categories == category]


def bounding_box_area(coords: np.ndarray) -> float:
    extent = coords.max(axis=0) - coords.min(axis=0)
    return float(extent[0] * extent[1])


# ---------------------------------------------------------------------------
# Cross-K
# ---------------------------------------------------------------------------

def cross_k(
    pattern: PointPattern,
    i: int,
    j: int,
    h: float,
    area: float | None = None,
) -> float:
    """
    K_ij(h) = W / (n_i n_j) * #{(i-point, j-point) pairs within h}, no edge
    correction. ``area`` defaults to the pattern's bounding-box area; with
    i == j a point is never paired with itself.
    """
    if h <= 0:
        raise ContractViolation(f"cross_k: h must be positive, got {h}")
    pts_i, pts_j = _points(pattern, i), _points(pattern, j)
    for cat, pts in ((i, pts_i), (j, pts_j)):
        if pts.shape[0] == 0:
            raise ContractViolation(f"cross_k: pattern {pattern.sample_id!r} has no points of category {cat}")
    w = bounding_box_area(pattern.coords) if area is None else float(area)
    if w <= 0:
        raise ContractViolation(f"cross_k: study area of pattern {pattern.sample_id!r} is zero")

    pairs = neighbor_pairs(pts_i, pts_j, h)
    count = pairs.shape[0]
    n_i, n_j = pts_i.shape[0], pts_j.shape[0]
    if i == j:
        count -= n_i
        if n_i < 2:
            return 0.0
        n_j = n_i - 1
    return w * count / (n_i * n_j)


# ---------------------------------------------------------------------------
# Participation ratio / index
# ---------------------------------------------------------------------------

def _check_subset(subset: Sequence[int]) -> tuple[int, ...]:
    subset = tuple(int(c) for c in subset)
    if len(subset) < 2 or len(set(subset)) != len(subset):
        raise ContractViolation(f"co-location subset needs >= 2 distinct categories, got {subset}")
    return subset


def _neighbor_sets(pattern: PointPattern, subset: tuple[int, ...], h: float) -> dict[tuple[int, int], list[set[int]]]:
    """For each ordered category pair (a, b) of the subset: per a-point, the set of b-point rows within h."""
    coords = {c: _points(pattern, c) for c in subset}
    out: dict[tuple[int, int], list[set[int]]] = {}
    for a, b in combinations(subset, 2):
        fwd: list[set[int]] = [set() for _ in range(coords[a].shape[0])]
        rev: list[set[int]] = [set() for _ in range(coords[b].shape[0])]
        for p, q in neighbor_pairs(coords[a], coords[b], h):
            fwd[p].add(int(q))
            rev[q].add(int(p))
        out[(a, b)] = fwd
        out[(b, a)] = rev
    return out


def participants(pattern: PointPattern, subset: Sequence[int], h: float) -> dict[int, set[int]]:
    """Per category of ``subset``: the rows (within that category) that occur in some clique instance."""
    subset = _check_subset(subset)
    nbrs = _neighbor_sets(pattern, subset, h)
    found: dict[int, set[int]] = {c: set() for c in subset}
    counts = {c: int(np.count_nonzero(pattern.categories == c)) for c in subset}
    if any(n == 0 for n in counts.values()):
        return found

    def extend(depth: int, chosen: list[int], candidates: set[int]) -> None:
        cat = subset[depth]
        for p in sorted(candidates):
            picked = chosen + [p]
            if depth + 1 == len(subset):
                for c, row in zip(subset, picked):
                    found[c].add(row)
                continue
            nxt_cat = subset[depth + 1]
            nxt = set.intersection(*(
                nbrs[(subset[d], nxt_cat)][row] for d, row in enumerate(picked)
            ))
            if nxt:
                extend(depth + 1, picked, nxt)

    extend(0, [], set(range(counts[subset[0]])))
    return found


def participation_ratio(pattern: PointPattern, subset: Sequence[int], category: int, h: float) -> float:
    """Fraction of ``category`` points that occur in at least one instance of ``subset``."""
    subset = _check_subset(subset)
    if category not in subset:
        raise ContractViolation(f"category {category} is not part of {subset}")
    total = int(np.count_nonzero(pattern.categories == category))
    if total == 0:
        raise ContractViolation(f"pattern {pattern.sample_id!r} has no points of category {category}")
    return len(participants(pattern, subset, h)[category]) / total


def participation_index(pattern: PointPattern, subset: Sequence[int], h: float) -> float:
    """Minimum participation ratio over the categories of ``subset``."""
    subset = _check_subset(subset)
    for c in subset:
        if not np.any(pattern.categories == c):
            raise ContractViolation(f"pattern {pattern.sample_id!r} has no points of category {c}")
    found = participants(pattern, subset, h)
    return min(len(found[c]) / int(np.count_nonzero(pattern.categories == c)) for c in subset)


# ---------------------------------------------------------------------------
# Feature vectors
# ---------------------------------------------------------------------------

def ordered_pairs(num_categories: int) -> list[tuple[int, int]]:
    """(a, b) with a != b, lexicographic by category id."""
    return [(a, b) for a in range(num_categories) for b in range(num_categories) if a != b]


def features(
    pattern: PointPattern,
    measure: str,
    thresholds: ThresholdSet | Iterable[float],
    num_categories: int,
) -> np.ndarray:
    """
    g(g-1)*|H| values ordered by (pair, h). PI entries repeat for both
    orderings of a pair. A pair with a category absent from the pattern
    scores 0.0, as does every cross-K entry of a pattern whose bounding
    box has zero area (all points on one line).
    """
    if measure not in MEASURES:
        raise ContractViolation(f"unknown co-location measure {measure!r}; expected one of {MEASURES}")
    if not isinstance(thresholds, ThresholdSet):
        thresholds = ThresholdSet(tuple(thresholds))
    present = set(np.unique(pattern.categories).tolist())
    flat = measure == "crossk" and bounding_box_area(pattern.coords) <= 0
    if flat:
        logger.debug("Pattern %s has a zero-area bounding box; cross-K features set to 0", pattern.sample_id)
    values: list[float] = []
    cache: dict[tuple[int, int, float], float] = {}
    for a, b in ordered_pairs(num_categories):
        for h in thresholds:
            if a not in present or b not in present:
                logger.debug("Pattern %s lacks category %d or %d; feature set to 0", pattern.sample_id, a, b)
                values.append(0.0)
            elif measure == "crossk":
                values.append(0.0 if flat else cross_k(pattern, a, b, h))
            else:
                key = (min(a, b), max(a, b), h)
                if key not in cache:
                    cache[key] = participation_index(pattern, (a, b), h)
                values.append(cache[key])
    return np.asarray(values, dtype=np.float64)


def feature_names(dataset: Dataset, thresholds: ThresholdSet) -> list[str]:
    names = dataset.vocabulary.names
    return [f"{names[a]}-{names[b]}@{h:g}" for a, b in ordered_pairs(dataset.num_categories) for h in thresholds]


def feature_matrix(dataset: Dataset, measure: str, thresholds: ThresholdSet) -> np.ndarray:
    """(patterns, g(g-1)|H|) feature matrix in dataset order."""
    rows = [features(p, measure, thresholds, dataset.num_categories) for p in dataset.patterns]
    width = len(ordered_pairs(dataset.num_categories)) * len(thresholds)
    return np.vstack(rows) if rows else np.empty((0, width))


def features_table(dataset: Dataset, measure: str, thresholds: ThresholdSet) -> pd.DataFrame:
    """``sample_id,<a>-<b>@<h>,...,label`` with class names as labels."""
    frame = pd.DataFrame(feature_matrix(dataset, measure, thresholds), columns=feature_names(dataset, thresholds))
    frame.insert(0, "sample_id", dataset.sample_ids)
    frame["label"] = [dataset.class_names[p.label] for p in dataset.patterns]
    return frame
