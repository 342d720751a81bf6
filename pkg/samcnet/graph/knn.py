"""
Deterministic k-nearest-neighbor graphs.

Neighbors are ranked by exact Euclidean distance, then by the neighbor's
content (coordinates or feature vector, lexicographically), never by its
row position. Rebuilding from a permuted input therefore selects the same
neighbors. Self-edges are excluded.

Coordinate space uses a k-d tree to find candidates; feature space uses a
dense distance matrix. Both hand the candidates to the same exact ranking,
so a feature matrix equal to the coordinates yields the identical graph.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from samcnet.errors import ContractViolation

logger = logging.getLogger(__name__)

# Slack added to the k-th candidate distance so that ties are never cut off
# by rounding in the candidate search.
_RELATIVE_SLACK = 1e-9
_ABSOLUTE_SLACK = 1e-12


@dataclass(frozen=True, eq=False)
class NeighborGraph:
    """Directed kNN graph: row i lists i's k neighbors, nearest first."""

    indices: np.ndarray     # (n, k) int64
    distances: np.ndarray   # (n, k) float64, same metric as construction space

    def __post_init__(self) -> None:
        self.indices.setflags(write=False)
        self.distances.setflags(write=False)

    @property
    def n(self) -> int:
        return int(self.indices.shape[0])

    @property
    def k(self) -> int:
        return int(self.indices.shape[1])

    def centers(self) -> np.ndarray:
        """Center index of every edge in row-major edge order, shape (n*k,)."""
        return np.repeat(np.arange(self.n), self.k)

    def neighbors(self) -> np.ndarray:
        """Neighbor index of every edge in row-major edge order, shape (n*k,)."""
        return self.indices.reshape(-1)


def _check(points: np.ndarray, k: int) -> np.ndarray:
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2:
        raise ContractViolation(f"expected an (n, F) array, got shape {points.shape}")
    if k < 1:
        raise ContractViolation(f"k must be >= 1, got {k}")
    if points.shape[0] <= k:
        raise ContractViolation(f"need more than k={k} points, got {points.shape[0]}")
    if not np.all(np.isfinite(points)):
        raise ContractViolation("non-finite point coordinates or features")
    return points


def _rank(points: np.ndarray, i: int, candidates: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Pick the k best candidates for row i by (distance, content)."""
    candidates = candidates[candidates != i]
    if candidates.size < k:
        raise ContractViolation(f"row {i}: found {candidates.size} candidates, need {k}")
    diff = points[candidates] - points[i]
    dist = np.sqrt(np.sum(diff * diff, axis=1))
    keys = [points[candidates, c] for c in range(points.shape[1] - 1, -1, -1)]
    order = np.lexsort(keys + [dist])[:k]
    return candidates[order], dist[order]


def _window_size(n: int, k: int) -> int:
    """Candidates kept per row before the exact ranking."""
    return min(n - 1, 2 * k + 2)


def _assemble(points: np.ndarray, k: int, window: np.ndarray, bound: np.ndarray, squared: bool) -> NeighborGraph:
    """
    Rank every row's candidate window at once by exact distance.

    ``window`` (n, m) holds each row's m nearest candidates (self excluded)
    under the search metric; ``bound`` (n,) is a lower bound on that metric
    for every point outside the window (+inf when the window is everyone).
    ``squared`` says whether ``bound`` is a squared distance.

    Only rows whose first k+1 exact distances contain a tie are re-ranked
    by content, and only rows whose window may have cut a tie are re-ranked
    over every point.
    """
    n = points.shape[0]
    diff = points[window] - points[:, None, :]
    dist = np.sqrt(np.sum(diff * diff, axis=2))
    order = np.argsort(dist, axis=1, kind="stable")
    dist = np.take_along_axis(dist, order, axis=1)
    window = np.take_along_axis(window, order, axis=1)

    kth = dist[:, k - 1]
    limit = kth * (1.0 + _RELATIVE_SLACK) + _ABSOLUTE_SLACK
    if squared:
        limit = limit * limit
    covered = bound > limit
    head = dist[:, : min(window.shape[1], k + 1)]
    tied = np.any(head[:, 1:] == head[:, :-1], axis=1)

    indices = window[:, :k].copy()
    distances = dist[:, :k].copy()
    redo = np.flatnonzero(tied | ~covered)
    everyone = np.arange(n)
    for i in redo:
        indices[i], distances[i] = _rank(points, int(i), window[i] if covered[i] else everyone, k)
    if redo.size:
        logger.debug("knn: %d of %d rows re-ranked for ties", redo.size, n)
    return NeighborGraph(indices, distances)


def _without_self(neighbors: np.ndarray, n: int, m: int) -> np.ndarray:
    """Drop each row's own index from an (n, m+1) query result, else its last column."""
    keep = neighbors != np.arange(n)[:, None]
    missing = keep.all(axis=1)
    keep[missing, -1] = False
    return neighbors[keep].reshape(n, m)


def knn_coords(coords: np.ndarray, k: int) -> NeighborGraph:
    """kNN graph on (n, 2) pixel coordinates."""
    coords = _check(coords, k)
    n = coords.shape[0]
    m = _window_size(n, k)
    tree = cKDTree(coords)
    # m+1 includes the point itself; everything not returned is at least
    # as far as the last returned distance.
    reach, neighbors = tree.query(coords, k=m + 1)
    window = _without_self(np.asarray(neighbors, dtype=np.int64), n, m)
    bound = np.full(n, np.inf) if m == n - 1 else reach[:, m]

    graph = _assemble(coords, k, window, bound, squared=False)
    logger.debug("knn_coords: n=%d k=%d", graph.n, k)
    return graph


def knn_features(features: np.ndarray, k: int) -> NeighborGraph:
    """kNN graph in (n, F) feature space (the dynamic graph of later layers)."""
    features = _check(features, k)
    n = features.shape[0]
    m = _window_size(n, k)
    sq = np.sum(features * features, axis=1)
    gram = sq[:, None] + sq[None, :] - 2.0 * (features @ features.T)
    np.fill_diagonal(gram, np.inf)

    if m == n - 1:
        window = np.argsort(gram, axis=1, kind="stable")[:, :m]
        bound = np.full(n, np.inf)
    else:
        part = np.argpartition(gram, m, axis=1)
        window = part[:, :m]
        # Rounding in the gram expansion is bounded by the slack below.
        slack = _RELATIVE_SLACK * (sq + sq.max() + 1.0)
        bound = np.take_along_axis(gram, part[:, m:m + 1], axis=1)[:, 0] - slack
    graph = _assemble(features, k, window.astype(np.int64), bound, squared=True)
    logger.debug("knn_features: n=%d F=%d k=%d", graph.n, features.shape[1], k)
    return graph


def brute_force_knn(points: np.ndarray, k: int) -> NeighborGraph:
    """Reference O(n^2) scan over every other point; same ranking rule."""
    points = _check(points, k)
    everyone = np.arange(points.shape[0])
    indices = np.empty((points.shape[0], k), dtype=np.int64)
    distances = np.empty((points.shape[0], k), dtype=np.float64)
    for i in range(points.shape[0]):
        indices[i], distances[i] = _rank(points, i, everyone, k)
    return NeighborGraph(indices, distances)


def stack_graphs(graphs: list[NeighborGraph]) -> NeighborGraph:
    """Disjoint union of per-pattern graphs; row blocks follow list order."""
    if not graphs:
        raise ContractViolation("stack_graphs: no graphs")
    offsets = np.cumsum([0] + [g.n for g in graphs[:-1]])
    indices = np.concatenate([g.indices + off for g, off in zip(graphs, offsets)])
    distances = np.concatenate([g.distances for g in graphs])
    return NeighborGraph(indices, distances)
