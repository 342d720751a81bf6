"""
Seeded random streams.

One top-level seed drives everything; each component asks for its own
stream by name so that adding draws in one place never shifts another.
"""

from __future__ import annotations

import zlib

import numpy as np


def _key(part: int | str) -> int:
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    return int(part) & 0xFFFFFFFFFFFFFFFF


def component_rng(seed: int, *path: int | str) -> np.random.Generator:
    """PCG64 generator for the stream identified by ``(seed, *path)``."""
    entropy = [_key(seed)] + [_key(p) for p in path]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))
