"""
Dataset splitting, fixed-size point sampling, and rotation augmentation.

Every function here is a pure function of its inputs and seed.
"""

from __future__ import annotations

import logging

import numpy as np

from samcnet.data.pattern import Dataset, PointPattern
from samcnet.errors import ContractViolation
from samcnet.tensor.rng import component_rng

logger = logging.getLogger(__name__)

MIN_PER_CLASS = 10
AUGMENT_STEP_DEGREES = 12.0
AUGMENT_ROTATIONS = 5


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def split(
    dataset: Dataset,
    seed: int,
    test_fraction: float = 0.2,
    validation_fraction: float = 0.1,
) -> tuple[Dataset, Dataset, Dataset]:
    """
    Stratified (train, val, test) split.

    ``test_fraction`` of each class goes to test; ``validation_fraction`` of
    what remains goes to validation. Patterns keep their dataset order.
    """
    counts = dataset.class_counts()
    small = [dataset.class_names[c] for c, n in enumerate(counts) if 0 < n < MIN_PER_CLASS]
    if small:
        raise ContractViolation(
            f"cannot split: classes {small} have fewer than {MIN_PER_CLASS} samples"
        )

    rng = component_rng(seed, "split")
    labels = dataset.labels
    train_idx: list[int] = []
    val_idx: list[int] = []
    test_idx: list[int] = []
    for c in range(dataset.num_classes):
        members = np.flatnonzero(labels == c)
        if members.size == 0:
            continue
        members = rng.permutation(members)
        n_test = _round_half_up(members.size * test_fraction)
        rest = members[n_test:]
        n_val = _round_half_up(rest.size * validation_fraction)
        test_idx.extend(members[:n_test])
        val_idx.extend(rest[:n_val])
        train_idx.extend(rest[n_val:])

    def subset(idx: list[int]) -> Dataset:
        return dataset.with_patterns([dataset.patterns[i] for i in sorted(idx)])

    train, val, test = subset(train_idx), subset(val_idx), subset(test_idx)
    logger.info("Split %d patterns: %d train / %d val / %d test", len(dataset), len(train), len(val), len(test))
    return train, val, test


def sample_points(pattern: PointPattern, n: int, seed: int) -> PointPattern:
    """
    Exactly ``n`` points: uniform without replacement when the pattern has
    at least ``n`` points; otherwise every point once plus draws with
    replacement to fill up to ``n``.
    """
    if n < 1:
        raise ContractViolation(f"sample size must be >= 1, got {n}")
    size = len(pattern)
    rng = component_rng(seed, "sample", pattern.sample_id)
    if size >= n:
        idx = np.sort(rng.choice(size, size=n, replace=False))
    else:
        logger.debug("Pattern %s has %d points < %d; sampling with replacement", pattern.sample_id, size, n)
        extra = rng.choice(size, size=n - size, replace=True)
        idx = np.concatenate([np.arange(size), np.sort(extra)])
    return pattern.with_points(pattern.coords[idx], pattern.categories[idx])


def report_undersized(dataset: Dataset, n: int) -> int:
    """Log once how many patterns will be topped up with replacement draws."""
    short = sum(1 for p in dataset.patterns if len(p) < n)
    if short:
        logger.info("%d of %d patterns have fewer than %d points; sampling with replacement", short, len(dataset), n)
    return short


def rotate_coords(coords: np.ndarray, degrees: float, center: np.ndarray | None = None) -> np.ndarray:
    """Rotate (n, 2) coordinates clockwise by ``degrees`` about ``center`` (origin by default)."""
    theta = np.deg2rad(degrees)
    c, s = np.cos(theta), np.sin(theta)
    clockwise = np.array([[c, -s], [s, c]])
    origin = np.zeros(2) if center is None else np.asarray(center, dtype=np.float64)
    return (np.asarray(coords, dtype=np.float64) - origin) @ clockwise + origin


def rotate(pattern: PointPattern, degrees: float) -> PointPattern:
    """Rotate clockwise about the pattern centroid; categories and label unchanged."""
    coords = rotate_coords(pattern.coords, degrees, pattern.centroid)
    return pattern.with_points(coords, pattern.categories)


def augment(train: Dataset) -> Dataset:
    """Each pattern six times: the original plus 12, 24, 36, 48 and 60 degree rotations."""
    out: list[PointPattern] = []
    for p in train.patterns:
        out.append(p)
        for step in range(1, AUGMENT_ROTATIONS + 1):
            degrees = AUGMENT_STEP_DEGREES * step
            out.append(rotate(p, degrees).renamed(f"{p.sample_id}@rot{degrees:g}"))
    logger.info("Augmented %d training patterns to %d", len(train), len(out))
    return train.with_patterns(out)
