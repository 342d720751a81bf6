"""
Local reference frame characterization (LRFC).

Coordinates are projected on three unit vectors 120 degrees apart and
each projection is encoded as (cos, sin) at S geometrically spaced
scales, giving a 6S-dimensional vector of squared norm exactly 3S.
Slot layout: scale-major, then direction, then (cos, sin).
"""

from __future__ import annotations

import numpy as np

from samcnet.config import LrfcConfig
from samcnet.graph.knn import NeighborGraph

DIRECTIONS = np.array([
    [1.0, 0.0],
    [-0.5, np.sqrt(3.0) / 2.0],
    [-0.5, -np.sqrt(3.0) / 2.0],
])


def encode_many(coords: np.ndarray, cfg: LrfcConfig) -> np.ndarray:
    """Encode (n, 2) coordinates to (n, 6S)."""
    coords = np.asarray(coords, dtype=np.float64).reshape(-1, 2)
    proj = coords @ DIRECTIONS.T                                 # (n, 3)
    angles = proj[:, None, :] / cfg.scales()[None, :, None]      # (n, S, 3)
    slots = np.stack([np.cos(angles), np.sin(angles)], axis=-1)  # (n, S, 3, 2)
    return slots.reshape(coords.shape[0], cfg.encoding_dims)


def encode(x: np.ndarray, cfg: LrfcConfig) -> np.ndarray:
    """PE(x) for a single 2D coordinate, length 6S."""
    return encode_many(np.asarray(x, dtype=np.float64).reshape(1, 2), cfg)[0]


def relative_encoding(c_i: np.ndarray, c_j: np.ndarray, cfg: LrfcConfig) -> np.ndarray:
    """|PE(c_i) - PE(c_j)| elementwise."""
    return np.abs(encode(c_i, cfg) - encode(c_j, cfg))


def edge_encodings(coords: np.ndarray, graph: NeighborGraph, cfg: LrfcConfig) -> np.ndarray:
    """Relative encoding of every graph edge, (n*k, 6S) in row-major edge order."""
    pe = encode_many(coords, cfg)
    return np.abs(pe[graph.centers()] - pe[graph.neighbors()])
