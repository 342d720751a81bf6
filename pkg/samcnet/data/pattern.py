"""
Data model for labeled multi-category point patterns.

A pattern is one field of view: 2D points (pixels), each with a category
id, plus the class label of the whole pattern.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from samcnet.errors import ContractViolation


@dataclass(frozen=True)
class CategoryVocabulary:
    """Ordered category names; ids are dense 0..g-1 in list order."""

    names: tuple[str, ...]
    ids: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if len(set(self.names)) != len(self.names):
            raise ContractViolation(f"duplicate category names in {self.names}")
        object.__setattr__(self, "ids", {n: i for i, n in enumerate(self.names)})

    @classmethod
    def from_names(cls, names: Iterable[str]) -> CategoryVocabulary:
        """Vocabulary of the distinct names, sorted."""
        return cls(tuple(sorted(set(names))))

    def __len__(self) -> int:
        return len(self.names)

    def id_of(self, name: str) -> int:
        try:
            return self.ids[name]
        except KeyError:
            raise ContractViolation(f"unknown category {name!r}") from None

    def name_of(self, category: int) -> str:
        if not 0 <= category < len(self.names):
            raise ContractViolation(f"category id {category} out of range")
        return self.names[category]


@dataclass(frozen=True, eq=False)
class PointPattern:
    """
    One labeled sample.

    ``coords`` is (n, 2) float64 pixels, ``categories`` is (n,) int64.
    Arrays are made read-only so patterns can be shared freely.
    """

    sample_id: str
    coords: np.ndarray
    categories: np.ndarray
    label: int

    def __post_init__(self) -> None:
        coords = np.array(self.coords, dtype=np.float64).reshape(-1, 2)
        cats = np.array(self.categories, dtype=np.int64).reshape(-1)
        if coords.shape[0] < 1:
            raise ContractViolation(f"pattern {self.sample_id!r} has no points")
        if cats.shape[0] != coords.shape[0]:
            raise ContractViolation(
                f"pattern {self.sample_id!r}: {coords.shape[0]} coordinates, {cats.shape[0]} categories"
            )
        if not np.all(np.isfinite(coords)):
            raise ContractViolation(f"pattern {self.sample_id!r} has non-finite coordinates")
        if cats.min() < 0:
            raise ContractViolation(f"pattern {self.sample_id!r} has a negative category id")
        coords.setflags(write=False)
        cats.setflags(write=False)
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "categories", cats)
        object.__setattr__(self, "label", int(self.label))

    def __len__(self) -> int:
        return int(self.coords.shape[0])

    @property
    def centroid(self) -> np.ndarray:
        return self.coords.mean(axis=0)

    def with_points(self, coords: np.ndarray, categories: np.ndarray) -> PointPattern:
        return PointPattern(self.sample_id, coords, categories, self.label)

    def renamed(self, sample_id: str) -> PointPattern:
        return PointPattern(sample_id, self.coords, self.categories, self.label)

    def count(self, category: int) -> int:
        return int(np.count_nonzero(self.categories == category))


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable collection of patterns sharing a vocabulary and class list."""

    vocabulary: CategoryVocabulary
    patterns: tuple[PointPattern, ...]
    class_names: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "patterns", tuple(self.patterns))
        object.__setattr__(self, "class_names", tuple(self.class_names))
        seen: set[str] = set()
        g = len(self.vocabulary)
        for p in self.patterns:
            if p.sample_id in seen:
                raise ContractViolation(f"duplicate sample_id {p.sample_id!r}")
            seen.add(p.sample_id)
            if not 0 <= p.label < len(self.class_names):
                raise ContractViolation(f"pattern {p.sample_id!r}: label {p.label} out of range")
            if int(p.categories.max()) >= g:
                raise ContractViolation(f"pattern {p.sample_id!r}: category id >= {g}")

    def __len__(self) -> int:
        return len(self.patterns)

    def __iter__(self):
        return iter(self.patterns)

    @property
    def num_categories(self) -> int:
        return len(self.vocabulary)

    @property
    def num_classes(self) -> int:
        return len(self.class_names)

    @property
    def labels(self) -> np.ndarray:
        return np.array([p.label for p in self.patterns], dtype=np.int64)

    @property
    def sample_ids(self) -> list[str]:
        return [p.sample_id for p in self.patterns]

    def with_patterns(self, patterns: Sequence[PointPattern]) -> Dataset:
        return Dataset(self.vocabulary, tuple(patterns), self.class_names)

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.num_classes)
