"""
SAMCNet building blocks: EdgeConv and point-pair prioritization.

Edge tensors are (n, k, d'): row i holds the k edges leaving point i in
the order of the NeighborGraph row. A batch of patterns is handled as one
disjoint graph (see graph.knn.stack_graphs).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Sequence

import numpy as np

from samcnet.config import LrfcConfig
from samcnet.errors import ContractViolation
from samcnet.graph.knn import NeighborGraph
from samcnet.model.lrfc import edge_encodings
from samcnet.tensor import ops
from samcnet.tensor.core import Tensor


# ---------------------------------------------------------------------------
# Batch-norm parameters + running statistics
# ---------------------------------------------------------------------------

@dataclass
class BatchNorm:
    """Affine parameters and running buffers of one batch-norm layer."""
    gamma: Tensor
    beta: Tensor
    running_mean: np.ndarray
    running_var: np.ndarray

    @classmethod
    def create(cls, channels: int, name: str) -> BatchNorm:
        return cls(
            gamma=Tensor(np.ones(channels), requires_grad=True, name=f"{name}.gamma"),
            beta=Tensor(np.zeros(channels), requires_grad=True, name=f"{name}.beta"),
            running_mean=np.zeros(channels),
            running_var=np.ones(channels),
        )

    def __call__(self, x: Tensor, training: bool) -> Tensor:
        return ops.batch_norm(x, self.gamma, self.beta, self.running_mean, self.running_var, training)


def _normalize(pre: Tensor, bn: BatchNorm | None, training: bool) -> Tensor:
    return pre if bn is None else bn(pre, training)


# ---------------------------------------------------------------------------
# EdgeConv
# ---------------------------------------------------------------------------

def edge_conv_first(
    coords: np.ndarray,
    graph: NeighborGraph,
    theta: Tensor,
    phi: Tensor,
    lrfc: LrfcConfig,
    use_lrfc: bool = True,
    global_features: np.ndarray | None = None,
    bn: BatchNorm | None = None,
    training: bool = False,
) -> Tensor:
    """
    First-layer EdgeConv on the coordinate graph:
    leaky_relu(theta . |PE(c_i) - PE(c_j)| + phi . c_i) per edge (i, j).

    With ``use_lrfc=False`` the local term is the raw |c_i - c_j|.
    ``global_features`` replaces c_i in the global term when given
    (the network passes centered, rescaled coordinates).
    """
    coords = np.asarray(coords, dtype=np.float64)
    if coords.shape != (graph.n, 2):
        raise ContractViolation(f"edge_conv_first: coords {coords.shape} for a graph of {graph.n} points")
    if use_lrfc:
        local = edge_encodings(coords, graph, lrfc)
    else:
        local = np.abs(coords[graph.centers()] - coords[graph.neighbors()])
    centers_global = coords if global_features is None else np.asarray(global_features, dtype=np.float64)
    if theta.shape[0] != local.shape[1] or phi.shape[0] != centers_global.shape[1]:
        raise ContractViolation(
            f"edge_conv_first: theta {theta.shape} / phi {phi.shape} vs local width "
            f"{local.shape[1]}, global width {centers_global.shape[1]}"
        )
    if theta.shape[1] != phi.shape[1]:
        raise ContractViolation(f"edge_conv_first: theta {theta.shape} and phi {phi.shape} widths differ")

    local_term = ops.matmul(Tensor(local), theta)
    global_term = ops.index_select(ops.matmul(Tensor(centers_global), phi), graph.centers())
    pre = _normalize(ops.add(local_term, global_term), bn, training)
    return ops.reshape(ops.leaky_relu(pre), (graph.n, graph.k, theta.shape[1]))


def edge_conv_generic(
    h: Tensor,
    graph: NeighborGraph,
    theta: Tensor,
    phi: Tensor,
    bn: BatchNorm | None = None,
    training: bool = False,
) -> Tensor:
    """leaky_relu(theta . (h_j - h_i) + phi . h_i) per edge (i, j)."""
    if h.ndim != 2 or h.shape[0] != graph.n:
        raise ContractViolation(f"edge_conv_generic: features {h.shape} for a graph of {graph.n} points")
    if theta.shape[0] != h.shape[1] or phi.shape[0] != h.shape[1] or theta.shape[1] != phi.shape[1]:
        raise ContractViolation(
            f"edge_conv_generic: theta {theta.shape}, phi {phi.shape} for feature width {h.shape[1]}"
        )
    centers, neighbors = graph.centers(), graph.neighbors()
    local = ops.subtract(ops.index_select(h, neighbors), ops.index_select(h, centers))
    local_term = ops.matmul(local, theta)
    global_term = ops.index_select(ops.matmul(h, phi), centers)
    pre = _normalize(ops.add(local_term, global_term), bn, training)
    return ops.reshape(ops.leaky_relu(pre), (graph.n, graph.k, theta.shape[1]))


# ---------------------------------------------------------------------------
# Point-pair prioritization
# ---------------------------------------------------------------------------

def pair_index(a: np.ndarray | int, b: np.ndarray | int) -> np.ndarray:
    """Storage row of the unordered category pair {a, b}: hi*(hi+1)/2 + lo."""
    a, b = np.asarray(a, dtype=np.int64), np.asarray(b, dtype=np.int64)
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    return hi * (hi + 1) // 2 + lo


@dataclass
class PairTable:
    """
    Association vectors indexed by unordered category pair, self-pairs
    included: g categories give g(g+1)/2 rows of width d'.
    """
    num_categories: int
    vectors: Tensor

    @classmethod
    def create(cls, num_categories: int, width: int, rng: np.random.Generator, name: str) -> PairTable:
        rows = num_categories * (num_categories + 1) // 2
        bound = np.sqrt(6.0 / (width + 1))
        data = rng.uniform(-bound, bound, size=(rows, width))
        return cls(num_categories, Tensor(data, requires_grad=True, name=name))

    @property
    def width(self) -> int:
        return int(self.vectors.shape[1])

    def index(self, c1: np.ndarray | int, c2: np.ndarray | int) -> np.ndarray:
        c1, c2 = np.asarray(c1), np.asarray(c2)
        for c in (c1, c2):
            if c.size and (c.min() < 0 or c.max() >= self.num_categories):
                raise ContractViolation(
                    f"category id out of range for a table of {self.num_categories} categories"
                )
        return pair_index(c1, c2)

    def lookup(self, c1: int, c2: int) -> np.ndarray:
        """The stored vector for {c1, c2}: a view into the live parameter array."""
        return self.vectors.data[int(self.index(c1, c2))]


def _edge_scores(
    transformed: Tensor,
    categories: np.ndarray,
    graph: NeighborGraph,
    table: PairTable,
    mode: str,
) -> Tensor:
    """e_hat_ij = a_{pair}^T (W e''_ij), one scalar per edge, shape (n*k,)."""
    cat_i = categories[graph.centers()]
    cat_j = categories[graph.neighbors()]

    def score(idx: np.ndarray) -> Tensor:
        rows = ops.index_select(table.vectors, idx)
        return ops.sum(ops.multiply(rows, transformed), axis=1)

    if mode == "pair":
        return score(table.index(cat_i, cat_j))
    if mode == "self":
        return score(table.index(cat_i, cat_i))
    if mode == "neighbor":
        return score(table.index(cat_j, cat_j))
    if mode == "self_neighbor":
        return ops.add(score(table.index(cat_i, cat_i)), score(table.index(cat_j, cat_j)))
    raise ContractViolation(f"unknown prioritization mode {mode!r}")


def top_k_mask(scores: np.ndarray, top_k: int | None) -> np.ndarray | None:
    """Keep the ``top_k`` largest entries per row (ties resolved by edge order)."""
    if top_k is None or top_k >= scores.shape[1]:
        return None
    order = np.argsort(-scores, axis=1, kind="stable")[:, :top_k]
    mask = np.zeros(scores.shape, dtype=bool)
    np.put_along_axis(mask, order, True, axis=1)
    return mask


def prioritization_weights(
    transformed: Tensor,
    categories: np.ndarray,
    graph: NeighborGraph,
    table: PairTable,
    mode: str,
    top_k: int | None = None,
) -> Tensor:
    """alpha_ij = softmax_j leaky_relu(e_hat_ij), shape (n, k)."""
    scores = ops.leaky_relu(ops.reshape(_edge_scores(transformed, categories, graph, table, mode), (graph.n, graph.k)))
    return ops.softmax(scores, axis=1, mask=top_k_mask(scores.data, top_k))


def prioritize(
    edges: Tensor,
    categories: np.ndarray,
    graph: NeighborGraph,
    table: PairTable,
    weight: Tensor,
    mode: str = "pair",
    top_k: int | None = None,
) -> Tensor:
    """
    Vertex embeddings v_i = sigma((1/|N_i|) sum_j alpha_ij W e''_ij), shape (n, d').

    ``mode='none'`` skips the association scores and averages W e'' plainly.
    With ``top_k`` only the k' highest-weighted neighbors are pooled and the
    weights renormalize over them; |N_i| is then k'.
    """
    n, k, d = edges.shape
    categories = np.asarray(categories, dtype=np.int64)
    if categories.shape != (n,):
        raise ContractViolation(f"prioritize: {categories.shape} categories for {n} points")
    if (n, k) != (graph.n, graph.k):
        raise ContractViolation(f"prioritize: edges {edges.shape} do not match graph ({graph.n}, {graph.k})")
    if weight.shape[0] != d:
        raise ContractViolation(f"prioritize: W {weight.shape} for edge width {d}")
    if categories.size and (categories.min() < 0 or categories.max() >= table.num_categories):
        raise ContractViolation(f"prioritize: category id outside [0, {table.num_categories})")

    transformed = ops.matmul(ops.reshape(edges, (n * k, d)), weight)
    out_width = weight.shape[1]
    stacked = ops.reshape(transformed, (n, k, out_width))
    if mode == "none":
        return ops.leaky_relu(ops.mean(stacked, axis=1))

    if table.width != out_width:
        raise ContractViolation(f"prioritize: pair vectors of width {table.width} for W output {out_width}")
    alpha = prioritization_weights(transformed, categories, graph, table, mode, top_k)
    spread = ops.broadcast_to(ops.reshape(alpha, (n, k, 1)), (n, k, out_width))
    pooled = ops.sum(ops.multiply(spread, stacked), axis=1)
    pooled_count = k if top_k is None else min(top_k, k)
    return ops.leaky_relu(ops.scale(pooled, 1.0 / pooled_count))


def multi_head(
    edges: Tensor,
    categories: np.ndarray,
    graph: NeighborGraph,
    tables: Sequence[PairTable],
    weights: Sequence[Tensor],
    aggregation: str = "average",
    mode: str = "pair",
    top_k: int | None = None,
) -> Tensor:
    """Aggregate K prioritization heads by averaging or concatenation."""
    if len(tables) != len(weights) or not tables:
        raise ContractViolation(f"multi_head: {len(tables)} tables for {len(weights)} weights")
    heads = [
        prioritize(edges, categories, graph, table, w, mode, top_k)
        for table, w in zip(tables, weights)
    ]
    if len(heads) == 1:
        return heads[0]
    if aggregation == "concat":
        return ops.concat(heads, axis=1)
    if aggregation == "average":
        return ops.scale(reduce(ops.add, heads), 1.0 / len(heads))
    raise ContractViolation(f"unknown head aggregation {aggregation!r}")
