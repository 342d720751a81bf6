"""
Central configuration for SAMCNet training, baselines and data generation.

All distances are in pixels. Defaults: epochs 200, batch 7, lr 1e-3,
k 6, dropout 0.5, one prioritization head, 5 grid scales over [1, 100],
emb_dims 1024, 1024 sampled points.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any

import numpy as np

from samcnet.errors import ConfigError

logger = logging.getLogger(__name__)

SEED_ENV_VAR = "SAMCNET_SEED"

PRIORITIZATION_MODES = ("none", "self", "neighbor", "self_neighbor", "pair")
HEAD_AGGREGATIONS = ("average", "concat")


_SCALAR_TYPES: dict[str, tuple[type, ...]] = {
    "int": (int,),
    "float": (int, float),
    "bool": (bool,),
    "str": (str,),
}


def _check_keys(cls: type, payload: dict[str, Any], section: str) -> None:
    """Reject non-objects, unknown keys and scalars of the wrong JSON type."""
    if not isinstance(payload, dict):
        raise ConfigError(f"{section}: expected an object, got {type(payload).__name__}")
    annotations = {f.name: str(f.type) for f in fields(cls)}
    for key, value in payload.items():
        if key not in annotations:
            raise ConfigError(f"unknown key '{section}.{key}'")
        _check_scalar(annotations[key], value, f"{section}.{key}")


def _check_scalar(annotation: str, value: Any, where: str) -> None:
    optional = annotation.endswith(" | None")
    base = annotation.removesuffix(" | None")
    allowed = _SCALAR_TYPES.get(base)
    if allowed is None or (optional and value is None):
        return
    if (isinstance(value, bool) and bool not in allowed) or not isinstance(value, allowed):
        raise ConfigError(f"{where}: expected {base}, got {type(value).__name__} {value!r}")


def _require(payload: dict[str, Any], section: str, *keys: str) -> None:
    for key in keys:
        if key not in payload:
            raise ConfigError(f"missing required key '{section}.{key}'")


def _sequence(value: Any, where: str, kind: type) -> tuple:
    """A JSON array whose items are all ``kind`` (ints are not booleans)."""
    if not isinstance(value, (list, tuple)):
        raise ConfigError(f"{where}: expected an array, got {type(value).__name__}")
    for item in value:
        if (isinstance(item, bool) and kind is not bool) or not isinstance(item, kind):
            raise ConfigError(f"{where}: expected {kind.__name__} items, got {item!r}")
    return tuple(value)


# ---------------------------------------------------------------------------
# Local reference frame characterization
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LrfcConfig:
    """Multi-scale sinusoidal encoding: S scales spaced geometrically in [min, max]."""

    grid_scale_count: int = 5    # S
    min_scale: float = 1.0       # lambda_min (px)
    max_scale: float = 100.0     # lambda_max (px)

    def __post_init__(self) -> None:
        if self.grid_scale_count < 1:
            raise ConfigError(f"grid_scale_count must be >= 1, got {self.grid_scale_count}")
        if not 0.0 < self.min_scale <= self.max_scale:
            raise ConfigError(
                f"need 0 < min_scale <= max_scale, got {self.min_scale}, {self.max_scale}"
            )

    @property
    def scale_ratio(self) -> float:
        """g = lambda_max / lambda_min."""
        return self.max_scale / self.min_scale

    @property
    def encoding_dims(self) -> int:
        return 6 * self.grid_scale_count

    def scales(self) -> np.ndarray:
        """lambda_s = lambda_min * g^(s/(S-1)), s = 0..S-1; S=1 gives lambda_min."""
        s = self.grid_scale_count
        if s == 1:
            return np.array([self.min_scale])
        exponents = np.arange(s) / (s - 1)
        return self.min_scale * self.scale_ratio ** exponents

    @classmethod
    def from_dict(cls, payload: dict[str, Any], section: str = "model.lrfc") -> LrfcConfig:
        _check_keys(cls, payload, section)
        return cls(**payload)


# ---------------------------------------------------------------------------
# Model architecture
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ModelConfig:
    """SAMCNet architecture and ablation switches."""

    k: int = 6
    layer_widths: tuple[int, ...] = (64, 64, 128, 256)
    emb_dims: int = 1024
    heads: int = 1
    head_aggregation: str = "average"      # "average" | "concat"
    dropout: float = 0.5
    top_k: int | None = None               # pool only the k' strongest neighbors
    use_lrfc: bool = True
    prioritization: str = "pair"           # see PRIORITIZATION_MODES
    num_points: int = 1024                 # points sampled per pattern
    batch_norm: bool = True
    head_widths: tuple[int, ...] = (512, 256)
    coord_scale: float = 100.0             # px; divides centered coords in layer-1 global term
    lrfc: LrfcConfig = field(default_factory=LrfcConfig)

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")
        if not self.layer_widths or any(w < 1 for w in self.layer_widths):
            raise ConfigError(f"layer_widths must be positive, got {self.layer_widths}")
        if self.emb_dims < 1 or any(w < 1 for w in self.head_widths):
            raise ConfigError("emb_dims and head_widths must be positive")
        if self.heads < 1:
            raise ConfigError(f"heads must be >= 1, got {self.heads}")
        if self.head_aggregation not in HEAD_AGGREGATIONS:
            raise ConfigError(f"head_aggregation must be one of {HEAD_AGGREGATIONS}")
        if self.prioritization not in PRIORITIZATION_MODES:
            raise ConfigError(f"prioritization must be one of {PRIORITIZATION_MODES}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.top_k is not None and not 1 <= self.top_k <= self.k:
            raise ConfigError(f"top_k must be in [1, k={self.k}], got {self.top_k}")
        if self.num_points <= self.k:
            raise ConfigError(f"num_points ({self.num_points}) must exceed k ({self.k})")
        if self.coord_scale <= 0:
            raise ConfigError("coord_scale must be positive")

    def layer_output_width(self, layer: int) -> int:
        """Vertex-embedding width produced by ``layer`` (0-based) after head aggregation."""
        width = self.layer_widths[layer]
        return width * self.heads if self.head_aggregation == "concat" else width

    @classmethod
    def from_dict(cls, payload: dict[str, Any], section: str = "model") -> ModelConfig:
        _check_keys(cls, payload, section)
        values = dict(payload)
        for key in ("layer_widths", "head_widths"):
            if key in values:
                values[key] = _sequence(values[key], f"{section}.{key}", int)
        if "lrfc" in values:
            values["lrfc"] = LrfcConfig.from_dict(values["lrfc"], f"{section}.lrfc")
        return cls(**values)


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrainConfig:
    """Optimizer and loop settings."""

    epochs: int = 200
    batch_size: int = 7
    lr: float = 1e-3
    beta1: float = 0.9          # "momentum"
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    test_fraction: float = 0.2
    validation_fraction: float = 0.1
    augment: bool = True        # original + five 12-degree clockwise rotations

    def __post_init__(self) -> None:
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("epochs and batch_size must be >= 1")
        if self.lr <= 0:
            raise ConfigError(f"lr must be positive, got {self.lr}")
        if not 0.0 < self.test_fraction < 1.0 or not 0.0 <= self.validation_fraction < 1.0:
            raise ConfigError("split fractions must be in (0, 1)")

    @classmethod
    def from_dict(cls, payload: dict[str, Any], section: str = "train") -> TrainConfig:
        _check_keys(cls, payload, section)
        return cls(**payload)


# ---------------------------------------------------------------------------
# Synthetic corpus
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PlantedRelationship:
    """
    A co-location planted in one class: parents of ``categories[0]`` get
    one child of every other category within ``radius``.
    """

    categories: tuple[str, ...]
    radius: float                 # px
    participation: float          # fraction of parents that get children

    def __post_init__(self) -> None:
        if len(self.categories) < 2 or len(set(self.categories)) != len(self.categories):
            raise ConfigError(f"planted subset needs >= 2 distinct categories: {self.categories}")
        if self.radius <= 0:
            raise ConfigError(f"planted radius must be > 0, got {self.radius}")
        if not 0.0 < self.participation <= 1.0:
            raise ConfigError(f"participation must be in (0, 1], got {self.participation}")

    @classmethod
    def from_dict(cls, payload: dict[str, Any], section: str) -> PlantedRelationship:
        _check_keys(cls, payload, section)
        _require(payload, section, "categories", "radius", "participation")
        values = dict(payload)
        values["categories"] = _sequence(values["categories"], f"{section}.categories", str)
        return cls(**values)


@dataclass(frozen=True)
class SyntheticClass:
    """One class of the synthetic corpus and the relationships planted in it."""

    name: str
    relationships: tuple[PlantedRelationship, ...] = ()

    @classmethod
    def from_dict(cls, payload: dict[str, Any], section: str) -> SyntheticClass:
        _check_keys(cls, payload, section)
        _require(payload, section, "name")
        rels = tuple(
            PlantedRelationship.from_dict(r, f"{section}.relationships[{i}]")
            for i, r in enumerate(_sequence(payload.get("relationships", []), f"{section}.relationships", dict))
        )
        return cls(name=payload["name"], relationships=rels)


def _default_classes() -> tuple[SyntheticClass, ...]:
    return (
        SyntheticClass("planted", (PlantedRelationship(("A", "B"), 30.0, 0.9),)),
        SyntheticClass("random"),
    )


@dataclass(frozen=True)
class SyntheticSpec:
    """
    Planted-pattern corpus: homogeneous Poisson background per category
    plus parent-child clusters realizing each class's relationships.
    """

    categories: tuple[str, ...] = ("A", "B", "C", "D")
    points_per_pattern: int = 512
    patterns_per_class: int = 200
    classes: tuple[SyntheticClass, ...] = field(default_factory=_default_classes)
    background_intensity: float = 1.5e-4   # points per px^2, per category
    arena_extent: float = 1000.0           # side of the square arena (px)
    seed: int = 0

    def __post_init__(self) -> None:
        if len(self.categories) < 1 or len(set(self.categories)) != len(self.categories):
            raise ConfigError(f"categories must be non-empty and unique: {self.categories}")
        if len(self.classes) < 2:
            raise ConfigError("a synthetic corpus needs at least two classes")
        if self.points_per_pattern < 1 or self.patterns_per_class < 1:
            raise ConfigError("points_per_pattern and patterns_per_class must be >= 1")
        if self.background_intensity <= 0 or self.arena_extent <= 0:
            raise ConfigError("background_intensity and arena_extent must be positive")
        for cls in self.classes:
            for rel in cls.relationships:
                unknown = [c for c in rel.categories if c not in self.categories]
                if unknown:
                    raise ConfigError(f"class {cls.name!r}: unknown categories {unknown}")
        expected = self.background_intensity * self.arena_extent ** 2 * len(self.categories)
        if expected < self.points_per_pattern:
            raise ConfigError(
                f"arena too small for requested intensity: expects {expected:.0f} points, "
                f"needs {self.points_per_pattern}"
            )

    @classmethod
    def from_dict(cls, payload: dict[str, Any], section: str = "synthetic") -> SyntheticSpec:
        _check_keys(cls, payload, section)
        values = dict(payload)
        if "categories" in values:
            values["categories"] = _sequence(values["categories"], f"{section}.categories", str)
        if "classes" in values:
            values["classes"] = tuple(
                SyntheticClass.from_dict(c, f"{section}.classes[{i}]")
                for i, c in enumerate(_sequence(values["classes"], f"{section}.classes", dict))
            )
        try:
            return cls(**values)
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{section}: {exc}") from exc

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


# ---------------------------------------------------------------------------
# Run configuration (JSON document consumed by the CLI)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DataConfig:
    """Either a points/labels CSV pair or an inline synthetic spec."""

    points: str | None = None
    labels: str | None = None
    synthetic: SyntheticSpec | None = None

    def __post_init__(self) -> None:
        has_files = self.points is not None or self.labels is not None
        if has_files and self.synthetic is not None:
            raise ConfigError("data: give either points/labels or synthetic, not both")
        if has_files and (self.points is None or self.labels is None):
            raise ConfigError("data: points and labels must be given together")

    @classmethod
    def from_dict(cls, payload: dict[str, Any], section: str = "data") -> DataConfig:
        _check_keys(cls, payload, section)
        values = dict(payload)
        if values.get("synthetic") is not None:
            values["synthetic"] = SyntheticSpec.from_dict(values["synthetic"], f"{section}.synthetic")
        return cls(**values)


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "runs/default"

    @classmethod
    def from_dict(cls, payload: dict[str, Any], section: str = "output") -> OutputConfig:
        _check_keys(cls, payload, section)
        return cls(**payload)


@dataclass(frozen=True)
class RunConfig:
    """Top-level document: data, model, train and output sections."""

    data: DataConfig = field(default_factory=DataConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    @classmethod
    def from_dict(cls, payload: dict[str, Any]) -> RunConfig:
        _check_keys(cls, payload, "config")
        try:
            data = DataConfig.from_dict(payload.get("data", {}))
            model_payload = payload.get("model", {})
            model = ModelConfig.from_dict(model_payload)
            if data.synthetic is not None and "num_points" not in model_payload:
                model = replace(model, num_points=data.synthetic.points_per_pattern)
                logger.info("model.num_points follows the synthetic corpus: %d", model.num_points)
            return cls(
                data=data,
                model=model,
                train=TrainConfig.from_dict(payload.get("train", {})),
                output=OutputConfig.from_dict(payload.get("output", {})),
            )
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


def load_run_config(path: str | Path) -> RunConfig:
    """Parse a run config JSON file and apply the SAMCNET_SEED override."""
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    config = RunConfig.from_dict(payload)
    return apply_seed_override(config)


def apply_seed_override(config: RunConfig) -> RunConfig:
    raw = os.environ.get(SEED_ENV_VAR)
    if raw is None:
        return config
    try:
        seed = int(raw)
    except ValueError as exc:
        raise ConfigError(f"{SEED_ENV_VAR} must be an integer, got {raw!r}") from exc
    logger.info("Seed overridden by %s=%d", SEED_ENV_VAR, seed)
    return replace(config, train=replace(config.train, seed=seed))
