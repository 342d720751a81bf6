"""
The SAMCNet classifier.

Wiring per batch of patterns (all handled as one disjoint graph):

    coordinate kNN -> EdgeConv(LRFC) + prioritization
    -> [feature kNN -> EdgeConv + prioritization] x (L-1)
    -> concat of every layer's vertex embeddings -> shared linear to emb_dims
    -> global max-pool and mean-pool per pattern, concatenated
    -> MLP head with dropout -> class logits
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from samcnet.config import ModelConfig
from samcnet.data.pattern import PointPattern
from samcnet.errors import ContractViolation
from samcnet.graph.knn import NeighborGraph, knn_coords, knn_features, stack_graphs
from samcnet.model.layers import (
    BatchNorm,
    PairTable,
    edge_conv_first,
    edge_conv_generic,
    multi_head,
)
from samcnet.tensor import ops
from samcnet.tensor.core import Tensor
from samcnet.tensor.rng import component_rng

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Parameters
# ---------------------------------------------------------------------------

def _uniform(rng: np.random.Generator, fan_in: int, shape: tuple[int, ...], name: str) -> Tensor:
    bound = 1.0 / np.sqrt(fan_in)
    return Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True, name=name)


@dataclass
class EdgeLayer:
    """One EdgeConv layer with its prioritization heads."""
    theta: Tensor
    phi: Tensor
    bn: BatchNorm | None
    weights: list[Tensor]          # W per head, d' x d'
    tables: list[PairTable]        # association vectors per head


@dataclass
class DenseLayer:
    """Linear map, optionally followed by batch norm; bias only without batch norm."""
    weight: Tensor
    bias: Tensor | None
    bn: BatchNorm | None

    def __call__(self, x: Tensor, training: bool) -> Tensor:
        out = ops.linear(x, self.weight, self.bias)
        return out if self.bn is None else self.bn(out, training)


@dataclass
class ModelParams:
    """Every learned tensor and batch-norm buffer of one SAMCNet instance."""

    config: ModelConfig
    num_categories: int
    num_classes: int
    layers: list[EdgeLayer] = field(default_factory=list)
    embedding: DenseLayer | None = None
    head: list[DenseLayer] = field(default_factory=list)
    output: DenseLayer | None = None

    @classmethod
    def initialize(cls, config: ModelConfig, num_categories: int, num_classes: int, seed: int) -> ModelParams:
        if num_categories < 1 or num_classes < 2:
            raise ContractViolation(
                f"need >= 1 category and >= 2 classes, got {num_categories} and {num_classes}"
            )
        params = cls(config, num_categories, num_classes)

        def rng(name: str) -> np.random.Generator:
            return component_rng(seed, "init", name)

        in_width = config.lrfc.encoding_dims if config.use_lrfc else 2
        global_width = 2
        for layer, width in enumerate(config.layer_widths):
            prefix = f"layer{layer}"
            theta = _uniform(rng(f"{prefix}.theta"), in_width, (in_width, width), f"{prefix}.theta")
            phi = _uniform(rng(f"{prefix}.phi"), global_width, (global_width, width), f"{prefix}.phi")
            bn = BatchNorm.create(width, f"{prefix}.bn") if config.batch_norm else None
            weights, tables = [], []
            for h in range(config.heads):
                w_name = f"{prefix}.head{h}.W"
                weights.append(_uniform(rng(w_name), width, (width, width), w_name))
                t_name = f"{prefix}.head{h}.pairs"
                tables.append(PairTable.create(num_categories, width, rng(t_name), t_name))
            params.layers.append(EdgeLayer(theta, phi, bn, weights, tables))
            in_width = global_width = config.layer_output_width(layer)

        concat_width = sum(config.layer_output_width(i) for i in range(len(config.layer_widths)))
        params.embedding = params._dense("embedding", concat_width, config.emb_dims, rng("embedding"))
        width = 2 * config.emb_dims
        for i, out in enumerate(config.head_widths):
            params.head.append(params._dense(f"head{i}", width, out, rng(f"head{i}")))
            width = out
        out_rng = rng("output")
        params.output = DenseLayer(
            _uniform(out_rng, width, (width, num_classes), "output.weight"),
            _uniform(out_rng, width, (num_classes,), "output.bias"),
            None,
        )
        logger.debug("Initialized %d parameter tensors (seed=%d)", len(params.named_parameters()), seed)
        return params

    def _dense(self, name: str, fan_in: int, fan_out: int, rng: np.random.Generator) -> DenseLayer:
        weight = _uniform(rng, fan_in, (fan_in, fan_out), f"{name}.weight")
        if self.config.batch_norm:
            return DenseLayer(weight, None, BatchNorm.create(fan_out, f"{name}.bn"))
        return DenseLayer(weight, _uniform(rng, fan_in, (fan_out,), f"{name}.bias"), None)

    # --- named views used by the optimizer and the checkpoint format ---

    def _batch_norms(self) -> Iterator[tuple[str, BatchNorm]]:
        for i, layer in enumerate(self.layers):
            if layer.bn is not None:
                yield f"layer{i}.bn", layer.bn
        dense = [("embedding", self.embedding)] + [(f"head{i}", d) for i, d in enumerate(self.head)]
        for name, d in dense:
            if d is not None and d.bn is not None:
                yield f"{name}.bn", d.bn

    def named_parameters(self) -> dict[str, Tensor]:
        """Every learned tensor keyed by a stable dotted name."""
        out: dict[str, Tensor] = {}
        for i, layer in enumerate(self.layers):
            out[f"layer{i}.theta"] = layer.theta
            out[f"layer{i}.phi"] = layer.phi
            for h, (w, table) in enumerate(zip(layer.weights, layer.tables)):
                out[f"layer{i}.head{h}.W"] = w
                out[f"layer{i}.head{h}.pairs"] = table.vectors
        dense = [("embedding", self.embedding)] + [(f"head{i}", d) for i, d in enumerate(self.head)]
        dense.append(("output", self.output))
        for name, d in dense:
            if d is None:
                continue
            out[f"{name}.weight"] = d.weight
            if d.bias is not None:
                out[f"{name}.bias"] = d.bias
        for name, bn in self._batch_norms():
            out[f"{name}.gamma"] = bn.gamma
            out[f"{name}.beta"] = bn.beta
        return out

    def named_buffers(self) -> dict[str, np.ndarray]:
        """Batch-norm running statistics (updated in place by training passes)."""
        out: dict[str, np.ndarray] = {}
        for name, bn in self._batch_norms():
            out[f"{name}.running_mean"] = bn.running_mean
            out[f"{name}.running_var"] = bn.running_var
        return out

    def pair_tables(self, layer: int) -> list[PairTable]:
        if not 0 <= layer < len(self.layers):
            raise ContractViolation(f"layer {layer} out of range [0, {len(self.layers)})")
        return self.layers[layer].tables


# ---------------------------------------------------------------------------
# Batches
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PatternBatch:
    """Patterns stacked row-wise; ``offsets[b]:offsets[b+1]`` are pattern b's rows."""

    coords: np.ndarray        # (N, 2)
    categories: np.ndarray    # (N,)
    offsets: np.ndarray       # (B+1,)
    labels: np.ndarray        # (B,)

    @classmethod
    def from_patterns(cls, patterns: Sequence[PointPattern], k: int) -> PatternBatch:
        if not patterns:
            raise ContractViolation("empty batch")
        for p in patterns:
            if len(p) <= k:
                raise ContractViolation(
                    f"pattern {p.sample_id!r} has {len(p)} points; needs more than k={k}"
                )
        sizes = [len(p) for p in patterns]
        return cls(
            coords=np.concatenate([p.coords for p in patterns]),
            categories=np.concatenate([p.categories for p in patterns]),
            offsets=np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64),
            labels=np.array([p.label for p in patterns], dtype=np.int64),
        )

    @property
    def size(self) -> int:
        return int(self.offsets.size - 1)

    def segments(self) -> Iterator[tuple[int, int]]:
        for b in range(self.size):
            yield int(self.offsets[b]), int(self.offsets[b + 1])

    def centered_coords(self, scale: float) -> np.ndarray:
        """Each pattern's coordinates minus its centroid, divided by ``scale``."""
        out = np.empty_like(self.coords)
        for lo, hi in self.segments():
            block = self.coords[lo:hi]
            out[lo:hi] = (block - block.mean(axis=0)) / scale
        return out


# ---------------------------------------------------------------------------
# Forward pass
# ---------------------------------------------------------------------------

@dataclass
class ForwardTrace:
    """Logits plus the per-layer graphs and vertex embeddings that produced them."""
    logits: Tensor
    graphs: list[NeighborGraph]
    embeddings: list[Tensor]
    batch: PatternBatch


def _graph_per_pattern(batch: PatternBatch, points: np.ndarray, k: int, coordinate: bool) -> NeighborGraph:
    build = knn_coords if coordinate else knn_features
    return stack_graphs([build(points[lo:hi], k) for lo, hi in batch.segments()])


def _pool(x: Tensor, batch: PatternBatch) -> Tensor:
    """Per-pattern global max-pool and mean-pool, concatenated: (B, 2*C)."""
    rows = []
    for lo, hi in batch.segments():
        block = ops.index_select(x, np.arange(lo, hi))
        pooled = ops.concat([ops.max(block, axis=0), ops.mean(block, axis=0)], axis=0)
        rows.append(ops.reshape(pooled, (1, pooled.shape[0])))
    return rows[0] if len(rows) == 1 else ops.concat(rows, axis=0)


def forward_details(
    params: ModelParams,
    batch: PatternBatch,
    training: bool = False,
    rng: np.random.Generator | None = None,
) -> ForwardTrace:
    """Run the network and keep every intermediate graph and vertex embedding."""
    cfg = params.config
    graphs: list[NeighborGraph] = []
    embeddings: list[Tensor] = []

    graph = _graph_per_pattern(batch, batch.coords, cfg.k, coordinate=True)
    first = params.layers[0]
    edges = edge_conv_first(
        batch.coords, graph, first.theta, first.phi, cfg.lrfc,
        use_lrfc=cfg.use_lrfc,
        global_features=batch.centered_coords(cfg.coord_scale),
        bn=first.bn, training=training,
    )
    v = multi_head(
        edges, batch.categories, graph, first.tables, first.weights,
        cfg.head_aggregation, cfg.prioritization, cfg.top_k,
    )
    graphs.append(graph)
    embeddings.append(v)

    for layer in params.layers[1:]:
        graph = _graph_per_pattern(batch, v.data, cfg.k, coordinate=False)
        edges = edge_conv_generic(v, graph, layer.theta, layer.phi, bn=layer.bn, training=training)
        v = multi_head(
            edges, batch.categories, graph, layer.tables, layer.weights,
            cfg.head_aggregation, cfg.prioritization, cfg.top_k,
        )
        graphs.append(graph)
        embeddings.append(v)

    stacked = embeddings[0] if len(embeddings) == 1 else ops.concat(embeddings, axis=1)
    x = ops.leaky_relu(params.embedding(stacked, training))
    x = _pool(x, batch)
    for dense in params.head:
        x = ops.leaky_relu(dense(x, training))
        x = ops.dropout(x, cfg.dropout, training, rng)
    logits = params.output(x, training)
    return ForwardTrace(logits, graphs, embeddings, batch)


def forward(
    params: ModelParams,
    patterns: Sequence[PointPattern],
    training: bool = False,
    rng: np.random.Generator | None = None,
) -> Tensor:
    """Class logits, shape (len(patterns), classes)."""
    batch = PatternBatch.from_patterns(patterns, params.config.k)
    _check_categories(params, batch)
    return forward_details(params, batch, training, rng).logits


def predict_logits(params: ModelParams, pattern: PointPattern) -> np.ndarray:
    """Eval-mode logits of a single pattern, shape (classes,)."""
    return forward(params, [pattern]).data[0].copy()


def _check_categories(params: ModelParams, batch: PatternBatch) -> None:
    if batch.categories.size and batch.categories.max() >= params.num_categories:
        raise ContractViolation(
            f"category id {int(batch.categories.max())} outside a model of {params.num_categories} categories"
        )
