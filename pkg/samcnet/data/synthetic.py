"""
Synthetic planted-pattern corpus generator.

Each pattern starts as an independent homogeneous Poisson process per
category on a square arena. Each relationship planted in the pattern's
class then picks a fraction of the parent-category points and moves one
point of every other category of the subset uniformly into the disk of
the given radius around that parent (creating a point only when the
category has none left to move). Moving rather than adding keeps the
category composition identical across classes, so only the spatial
arrangement differs. Finally the pattern is thinned uniformly to the
requested size.
"""

from __future__ import annotations

import logging

import numpy as np

from samcnet.config import PlantedRelationship, SyntheticSpec
from samcnet.data.pattern import CategoryVocabulary, Dataset, PointPattern
from samcnet.errors import ConfigError
from samcnet.tensor.rng import component_rng

logger = logging.getLogger(__name__)


def _uniform_disk(rng: np.random.Generator, center: np.ndarray, radius: float) -> np.ndarray:
    r = radius * np.sqrt(rng.random())
    theta = 2.0 * np.pi * rng.random()
    return center + r * np.array([np.cos(theta), np.sin(theta)])


def _plant(
    rng: np.random.Generator,
    coords: list[np.ndarray],
    cats: list[int],
    rel: PlantedRelationship,
    vocabulary: CategoryVocabulary,
    used: set[int],
) -> None:
    """Realize one relationship in place on the point lists."""
    ids = [vocabulary.id_of(c) for c in rel.categories]
    parent_cat, child_cats = ids[0], ids[1:]
    cat_arr = np.asarray(cats)
    parents = np.flatnonzero(cat_arr == parent_cat)
    n_parents = int(np.floor(rel.participation * parents.size + 0.5))
    if n_parents == 0:
        return
    chosen = rng.choice(parents, size=n_parents, replace=False)
    used.update(int(p) for p in chosen)

    for child_cat in child_cats:
        pool = [int(i) for i in rng.permutation(np.flatnonzero(cat_arr == child_cat)) if int(i) not in used]
        for parent in chosen:
            position = _uniform_disk(rng, coords[parent], rel.radius)
            if pool:
                child = pool.pop()
                coords[child] = position
            else:
                child = len(coords)
                coords.append(position)
                cats.append(child_cat)
            used.add(child)


def _draw_pattern(
    spec: SyntheticSpec,
    vocabulary: CategoryVocabulary,
    rng: np.random.Generator,
    relationships: tuple[PlantedRelationship, ...],
) -> tuple[np.ndarray, np.ndarray]:
    area = spec.arena_extent ** 2
    coords: list[np.ndarray] = []
    cats: list[int] = []
    for name in spec.categories:
        count = rng.poisson(spec.background_intensity * area)
        xy = rng.random((count, 2)) * spec.arena_extent
        coords.extend(xy)
        cats.extend([vocabulary.id_of(name)] * count)

    used: set[int] = set()
    for rel in relationships:
        _plant(rng, coords, cats, rel, vocabulary, used)

    coords_arr = np.asarray(coords, dtype=np.float64).reshape(-1, 2)
    cats_arr = np.asarray(cats, dtype=np.int64)
    total = coords_arr.shape[0]
    if total > spec.points_per_pattern:
        keep = np.sort(rng.choice(total, size=spec.points_per_pattern, replace=False))
    else:
        logger.debug("Pattern drew %d <= %d points; keeping all", total, spec.points_per_pattern)
        keep = np.arange(total)
    order = rng.permutation(keep)
    return coords_arr[order], cats_arr[order]


def generate_synthetic(spec: SyntheticSpec) -> Dataset:
    """Draw the corpus described by ``spec``; deterministic given ``spec.seed``."""
    vocabulary = CategoryVocabulary.from_names(spec.categories)
    class_names = tuple(sorted(c.name for c in spec.classes))
    if len(set(class_names)) != len(class_names):
        raise ConfigError(f"duplicate class names in {class_names}")

    patterns: list[PointPattern] = []
    for cls in spec.classes:
        label = class_names.index(cls.name)
        for i in range(spec.patterns_per_class):
            rng = component_rng(spec.seed, "synthetic", cls.name, i)
            coords, cats = _draw_pattern(spec, vocabulary, rng, cls.relationships)
            patterns.append(PointPattern(f"{cls.name}-{i:04d}", coords, cats, label))

    logger.info(
        "Generated %d synthetic patterns (%d classes x %d, %d categories, seed=%d)",
        len(patterns), len(spec.classes), spec.patterns_per_class, len(vocabulary), spec.seed,
    )
    return Dataset(vocabulary, tuple(patterns), class_names)
