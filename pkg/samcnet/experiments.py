"""
Command orchestration: each ``run_*`` function performs one CLI command
end to end (load inputs, compute, write artifacts) and returns its result
so that it can be driven from tests without the argument parser.

Artifacts per command, all inside the output directory:

  generate   points.csv, labels.csv, spec.json
  train      model.samcnet, history.csv, metrics.json, config.json
  eval       metrics.json
  baseline   metrics.json, features.csv
  ablate     ablation.csv
  sweep      sweep.csv
  interpret  pair_importance.csv, relationships.csv, interpret.json
  bench      bench.json
"""

from __future__ import annotations

import json
import logging
import os
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Sequence

import numpy as np
import pandas as pd

from samcnet.colocation.classifiers import MlpSettings, create_classifier
from samcnet.colocation.measures import ThresholdSet, feature_matrix, features_table
from samcnet.config import SEED_ENV_VAR, ModelConfig, RunConfig, SyntheticSpec
from samcnet.data.io import load_csv, write_csv
from samcnet.data.pattern import CategoryVocabulary, Dataset
from samcnet.data.synthetic import generate_synthetic
from samcnet.data.transforms import augment, report_undersized, sample_points, split
from samcnet.errors import ConfigError
from samcnet.interpret.importance import pair_importance_frame
from samcnet.interpret.relationships import READOUT_NAME, nway_features, rank_by_permutation
from samcnet.model.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from samcnet.model.network import ModelParams, forward
from samcnet.training.metrics import METRIC_KEYS, Metrics, compute_metrics
from samcnet.training.trainer import TrainingHistory, evaluate, train

logger = logging.getLogger(__name__)

POINTS_FILE = "points.csv"
LABELS_FILE = "labels.csv"
CHECKPOINT_FILE = "model.samcnet"
HISTORY_FILE = "history.csv"
METRICS_FILE = "metrics.json"

# (row name, use_lrfc, prioritization mode)
ABLATION_ROWS: tuple[tuple[str, bool, str], ...] = (
    ("Only LRFC", True, "none"),
    ("Only self-prt", False, "self"),
    ("Neighbor-prt", False, "neighbor"),
    ("LRFC+ self-prt", True, "self"),
    ("LRFC+ Neighbor-prt", True, "neighbor"),
    ("self-prt + Neighbor-prt", False, "self_neighbor"),
    ("Entire model", True, "pair"),
)
SWEEP_PARAMS = ("grid_scale_count", "k", "heads")
BENCH_WARMUP = 3
RELATIONSHIPS_TOP = 20


def _write_json(path: Path, payload: dict[str, Any]) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _output_dir(directory: str | Path) -> Path:
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# Data
# ---------------------------------------------------------------------------

def load_data_dir(
    directory: str | Path,
    vocabulary: CategoryVocabulary | None = None,
    class_names: tuple[str, ...] | None = None,
) -> Dataset:
    """The points.csv / labels.csv pair inside ``directory``."""
    directory = Path(directory)
    return load_csv(directory / POINTS_FILE, directory / LABELS_FILE, vocabulary, class_names)


def load_dataset(config: RunConfig) -> Dataset:
    data = config.data
    if data.synthetic is not None:
        return generate_synthetic(data.synthetic)
    if data.points is None or data.labels is None:
        raise ConfigError("data: no points/labels files and no synthetic spec given")
    return load_csv(data.points, data.labels)


# ---------------------------------------------------------------------------
# generate
# ---------------------------------------------------------------------------

def run_generate(spec_path: str | Path, out_dir: str | Path, seed: int | None = None) -> Dataset:
    try:
        payload = json.loads(Path(spec_path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{spec_path}: invalid JSON: {exc}") from exc
    spec = SyntheticSpec.from_dict(payload)
    env_seed = os.environ.get(SEED_ENV_VAR)
    if seed is None and env_seed is not None:
        try:
            seed = int(env_seed)
        except ValueError as exc:
            raise ConfigError(f"{SEED_ENV_VAR} must be an integer, got {env_seed!r}") from exc
    if seed is not None:
        spec = replace(spec, seed=seed)

    out = _output_dir(out_dir)
    dataset = generate_synthetic(spec)
    write_csv(dataset, out / POINTS_FILE, out / LABELS_FILE)
    _write_json(out / "spec.json", spec.to_dict())
    return dataset


# ---------------------------------------------------------------------------
# train / eval
# ---------------------------------------------------------------------------

@dataclass
class TrainResult:
    params: ModelParams
    history: TrainingHistory
    metrics: Metrics
    checkpoint: Path


def _prepare_splits(config: RunConfig, dataset: Dataset) -> tuple[Dataset, Dataset, Dataset]:
    t = config.train
    train_set, val_set, test_set = split(dataset, t.seed, t.test_fraction, t.validation_fraction)
    if t.augment:
        train_set = augment(train_set)
    return train_set, val_set, test_set


def run_train(config: RunConfig, out_dir: str | Path | None = None) -> TrainResult:
    out = _output_dir(out_dir or config.output.directory)
    dataset = load_dataset(config)
    train_set, val_set, test_set = _prepare_splits(config, dataset)
    params, history = train(train_set, val_set, config.model, config.train)

    checkpoint = out / CHECKPOINT_FILE
    save_checkpoint(
        params, dataset.vocabulary, dataset.class_names, checkpoint,
        metadata={"seed": config.train.seed, "best_epoch": history.best_epoch},
    )
    history.write_csv(out / HISTORY_FILE)
    metrics = evaluate(test_set, params)
    metrics.write_json(out / METRICS_FILE)
    _write_json(out / "config.json", config.to_dict())
    return TrainResult(params, history, metrics, checkpoint)


def run_eval(checkpoint_path: str | Path, data_dir: str | Path, out_dir: str | Path | None = None) -> Metrics:
    checkpoint = load_checkpoint(checkpoint_path)
    dataset = load_data_dir(data_dir, checkpoint.vocabulary, checkpoint.class_names)
    metrics = evaluate(dataset, checkpoint.params)
    out = _output_dir(out_dir or Path(checkpoint_path).parent)
    metrics.write_json(out / METRICS_FILE)
    return metrics


# ---------------------------------------------------------------------------
# baseline
# ---------------------------------------------------------------------------

def run_baseline(
    measure: str,
    classifier: str,
    data_dir: str | Path,
    out_dir: str | Path,
    thresholds: Sequence[float] = (50.0,),
    seed: int = 0,
    mlp: MlpSettings | None = None,
) -> Metrics:
    """Co-location features on a stratified split, one classifier, shared metrics schema."""
    dataset = load_data_dir(data_dir)
    hset = ThresholdSet(tuple(thresholds))
    train_set, val_set, test_set = split(dataset, seed)
    fit_set = train_set.with_patterns(train_set.patterns + val_set.patterns)

    model = create_classifier(classifier, seed=seed, mlp=mlp)
    model.fit(feature_matrix(fit_set, measure, hset), fit_set.labels)

    start = time.perf_counter()
    test_features = feature_matrix(test_set, measure, hset)
    preds = model.predict(test_features)
    per_sample = (time.perf_counter() - start) / len(test_set)
    metrics = compute_metrics(test_set.labels, preds, dataset.num_classes, per_sample)

    out = _output_dir(out_dir)
    metrics.write_json(out / METRICS_FILE)
    features_table(dataset, measure, hset).to_csv(out / "features.csv", index=False, lineterminator="\n")
    logger.info("Baseline %s+%s: accuracy=%.4f f1=%.4f", measure, classifier, metrics.accuracy, metrics.f1)
    return metrics


# ---------------------------------------------------------------------------
# ablate / sweep
# ---------------------------------------------------------------------------

def _train_and_score(config: RunConfig, splits: tuple[Dataset, Dataset, Dataset]) -> Metrics:
    train_set, val_set, test_set = splits
    params, _ = train(train_set, val_set, config.model, config.train)
    return evaluate(test_set, params)


def _metric_row(metrics: Metrics) -> list[float]:
    return [getattr(metrics, key) for key in METRIC_KEYS]


def run_ablate(config: RunConfig, out_dir: str | Path | None = None) -> pd.DataFrame:
    """Train and test each ablation configuration on one shared split."""
    out = _output_dir(out_dir or config.output.directory)
    splits = _prepare_splits(config, load_dataset(config))
    rows = []
    for name, use_lrfc, mode in ABLATION_ROWS:
        model = replace(config.model, use_lrfc=use_lrfc, prioritization=mode)
        metrics = _train_and_score(replace(config, model=model), splits)
        logger.info("Ablation %-24s accuracy=%.4f f1=%.4f", name, metrics.accuracy, metrics.f1)
        rows.append([name, use_lrfc, mode, *_metric_row(metrics)])
    table = pd.DataFrame(rows, columns=["configuration", "use_lrfc", "prioritization", *METRIC_KEYS])
    table.to_csv(out / "ablation.csv", index=False, lineterminator="\n")
    return table


def _with_param(model: ModelConfig, param: str, value: int) -> ModelConfig:
    if param == "grid_scale_count":
        return replace(model, lrfc=replace(model.lrfc, grid_scale_count=value))
    if param == "k":
        top_k = model.top_k if model.top_k is None or model.top_k <= value else value
        return replace(model, k=value, top_k=top_k)
    if param == "heads":
        return replace(model, heads=value)
    raise ConfigError(f"cannot sweep {param!r}; choose one of {SWEEP_PARAMS}")


def run_sweep(
    config: RunConfig,
    param: str,
    values: Sequence[int],
    out_dir: str | Path | None = None,
) -> pd.DataFrame:
    """One trained model per value of ``param``; everything else fixed."""
    if param not in SWEEP_PARAMS:
        raise ConfigError(f"cannot sweep {param!r}; choose one of {SWEEP_PARAMS}")
    out = _output_dir(out_dir or config.output.directory)
    splits = _prepare_splits(config, load_dataset(config))
    rows = []
    for value in values:
        model = _with_param(config.model, param, int(value))
        metrics = _train_and_score(replace(config, model=model), splits)
        logger.info("Sweep %s=%d accuracy=%.4f", param, value, metrics.accuracy)
        rows.append([param, int(value), *_metric_row(metrics)])
    table = pd.DataFrame(rows, columns=["param", "value", *METRIC_KEYS])
    table.to_csv(out / "sweep.csv", index=False, lineterminator="\n")
    return table


# ---------------------------------------------------------------------------
# interpret / bench
# ---------------------------------------------------------------------------

def run_interpret(
    checkpoint_path: str | Path,
    data_dir: str | Path,
    out_dir: str | Path | None = None,
    seed: int = 0,
    norm: str = "l2",
    graph_source: str = "feature",
    top: int = RELATIONSHIPS_TOP,
) -> tuple[pd.DataFrame, pd.DataFrame]:
    checkpoint = load_checkpoint(checkpoint_path)
    dataset = load_data_dir(data_dir, checkpoint.vocabulary, checkpoint.class_names)
    out = _output_dir(out_dir or Path(checkpoint_path).parent)

    importance = pair_importance_frame(checkpoint.params, checkpoint.vocabulary, norm)
    importance.to_csv(out / "pair_importance.csv", index=False, lineterminator="\n")

    feature_maps = nway_features(checkpoint.params, dataset, graph_source)
    ranking = rank_by_permutation(feature_maps, dataset.labels, seed)
    relationships = ranking.to_frame(checkpoint.vocabulary, top)
    relationships.to_csv(out / "relationships.csv", index=False, lineterminator="\n")
    _write_json(out / "interpret.json", {
        "readout": READOUT_NAME,
        "readout_heldout_accuracy": ranking.baseline_accuracy,
        "norm": norm,
        "graph_source": graph_source,
        "signatures": len(ranking.entries),
        "seed": seed,
    })
    return importance, relationships


@dataclass(frozen=True)
class BenchResult:
    mean_seconds: float
    median_seconds: float
    samples: int
    num_points: int


def bench_checkpoint(checkpoint: Checkpoint, dataset: Dataset, num_points: int | None = None) -> BenchResult:
    """Per-sample eval-mode forward time; the first BENCH_WARMUP calls are discarded."""
    params = checkpoint.params
    n = num_points or params.config.num_points
    report_undersized(dataset, n)
    sampled = [sample_points(p, n, 0) for p in dataset.patterns]
    for i in range(BENCH_WARMUP):
        forward(params, [sampled[i % len(sampled)]])
    timings = []
    for pattern in sampled:
        start = time.perf_counter()
        forward(params, [pattern])
        timings.append(time.perf_counter() - start)
    return BenchResult(float(np.mean(timings)), float(np.median(timings)), len(timings), n)


def run_bench(
    checkpoint_path: str | Path,
    data_dir: str | Path,
    out_dir: str | Path | None = None,
    num_points: int | None = None,
) -> BenchResult:
    checkpoint = load_checkpoint(checkpoint_path)
    dataset = load_data_dir(data_dir, checkpoint.vocabulary, checkpoint.class_names)
    result = bench_checkpoint(checkpoint, dataset, num_points)
    out = _output_dir(out_dir or Path(checkpoint_path).parent)
    _write_json(out / "bench.json", {
        "mean_seconds": result.mean_seconds,
        "median_seconds": result.median_seconds,
        "samples": result.samples,
        "num_points": result.num_points,
    })
    logger.info(
        "Bench: %d samples at n=%d, mean %.5fs, median %.5fs",
        result.samples, result.num_points, result.mean_seconds, result.median_seconds,
    )
    return result
