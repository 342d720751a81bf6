"""
Command-line tests: every subcommand driven through ``main`` on a tiny corpus.

The full-size planted-pair runs are marked ``slow`` and only run with
``pytest --runslow``.
"""

import json
from pathlib import Path
from typing import Any

import pandas as pd
import pytest

from samcnet.config import SEED_ENV_VAR
from samcnet.experiments import (
    ABLATION_ROWS,
    CHECKPOINT_FILE,
    HISTORY_FILE,
    LABELS_FILE,
    METRICS_FILE,
    POINTS_FILE,
)
from samcnet.interpret.importance import PAIR_IMPORTANCE_COLUMNS
from samcnet.interpret.relationships import RELATIONSHIP_COLUMNS
from samcnet.main import main
from samcnet.training.metrics import METRIC_KEYS

CORPUS: dict[str, Any] = {
    "categories": ["A", "B", "C"],
    "points_per_pattern": 30,
    "patterns_per_class": 10,
    "classes": [
        {"name": "planted", "relationships": [{"categories": ["A", "B"], "radius": 15.0, "participation": 0.9}]},
        {"name": "random"},
    ],
    "background_intensity": 1e-3,
    "arena_extent": 200.0,
    "seed": 4,
}

TINY_MODEL: dict[str, Any] = {
    "k": 3,
    "layer_widths": [4, 4],
    "emb_dims": 8,
    "heads": 1,
    "dropout": 0.0,
    "num_points": 16,
    "head_widths": [6],
    "lrfc": {"grid_scale_count": 2, "min_scale": 1.0, "max_scale": 50.0},
}


def write_json(path: Path, payload: dict[str, Any]) -> Path:
    path.write_text(json.dumps(payload), encoding="utf-8")
    return path


def read_json(path: Path) -> dict[str, Any]:
    return json.loads(path.read_text(encoding="utf-8"))


def run_config(out_dir: Path, **train: Any) -> dict[str, Any]:
    return {
        "data": {"synthetic": CORPUS},
        "model": TINY_MODEL,
        "train": {"epochs": 1, "batch_size": 4, "seed": 0, "augment": False, **train},
        "output": {"directory": str(out_dir)},
    }


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory: pytest.TempPathFactory) -> Path:
    root = tmp_path_factory.mktemp("corpus")
    spec = write_json(root / "corpus.json", CORPUS)
    with pytest.MonkeyPatch.context() as mp:
        mp.delenv(SEED_ENV_VAR, raising=False)
        assert main(["generate", "--spec", str(spec), "--out", str(root / "data")]) == 0
    return root / "data"


@pytest.fixture(scope="module")
def trained(tmp_path_factory: pytest.TempPathFactory) -> Path:
    root = tmp_path_factory.mktemp("run")
    config = write_json(root / "run.json", run_config(root / "out"))
    with pytest.MonkeyPatch.context() as mp:
        mp.delenv(SEED_ENV_VAR, raising=False)
        assert main(["train", "--config", str(config)]) == 0
    return root / "out"


@pytest.fixture
def config_file(tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> Path:
    monkeypatch.delenv(SEED_ENV_VAR, raising=False)
    return write_json(tmp_path / "run.json", run_config(tmp_path / "out"))


class TestGenerate:
    def test_writes_csv_pair_and_spec(self, data_dir: Path) -> None:
        assert (data_dir / POINTS_FILE).exists()
        labels = pd.read_csv(data_dir / LABELS_FILE)
        assert list(labels.columns) == ["sample_id", "label"]
        assert len(labels) == 20
        assert sorted(labels["label"].unique()) == ["planted", "random"]
        assert read_json(data_dir / "spec.json")["seed"] == 4

    def test_seed_flag_and_env_override(self, tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> None:
        spec = write_json(tmp_path / "corpus.json", CORPUS)
        monkeypatch.setenv(SEED_ENV_VAR, "9")
        assert main(["generate", "--spec", str(spec), "--out", str(tmp_path / "env")]) == 0
        assert read_json(tmp_path / "env" / "spec.json")["seed"] == 9
        assert main(["generate", "--spec", str(spec), "--out", str(tmp_path / "flag"), "--seed", "3"]) == 0
        assert read_json(tmp_path / "flag" / "spec.json")["seed"] == 3

    def test_same_seed_same_bytes(self, tmp_path: Path, data_dir: Path, monkeypatch: pytest.MonkeyPatch) -> None:
        monkeypatch.delenv(SEED_ENV_VAR, raising=False)
        spec = write_json(tmp_path / "corpus.json", CORPUS)
        assert main(["generate", "--spec", str(spec), "--out", str(tmp_path / "again")]) == 0
        assert (tmp_path / "again" / POINTS_FILE).read_bytes() == (data_dir / POINTS_FILE).read_bytes()


class TestTrainAndEval:
    def test_train_outputs(self, trained: Path) -> None:
        assert (trained / CHECKPOINT_FILE).exists()
        history = pd.read_csv(trained / HISTORY_FILE)
        assert list(history["epoch"]) == [1]
        metrics = read_json(trained / METRICS_FILE)
        for key in METRIC_KEYS:
            assert 0.0 <= metrics[key] <= 1.0, key
        assert read_json(trained / "config.json")["train"]["seed"] == 0

    def test_eval_on_data_dir(self, trained: Path, data_dir: Path, tmp_path: Path) -> None:
        assert main(["eval", "--checkpoint", str(trained / CHECKPOINT_FILE), "--data", str(data_dir),
                     "--out", str(tmp_path)]) == 0
        metrics = read_json(tmp_path / METRICS_FILE)
        assert set(METRIC_KEYS) <= set(metrics)

    def test_identical_runs_are_bitwise_equal(self, config_file: Path, tmp_path: Path) -> None:
        assert main(["train", "--config", str(config_file), "--out", str(tmp_path / "a")]) == 0
        assert main(["train", "--config", str(config_file), "--out", str(tmp_path / "b")]) == 0
        a, b = tmp_path / "a", tmp_path / "b"
        assert (a / CHECKPOINT_FILE).read_bytes() == (b / CHECKPOINT_FILE).read_bytes()
        assert (a / HISTORY_FILE).read_bytes() == (b / HISTORY_FILE).read_bytes()
        ma, mb = read_json(a / METRICS_FILE), read_json(b / METRICS_FILE)
        ma.pop("per_sample_seconds")
        mb.pop("per_sample_seconds")
        assert ma == mb

    def test_env_seed_reaches_config(self, config_file: Path, tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> None:
        monkeypatch.setenv(SEED_ENV_VAR, "5")
        assert main(["train", "--config", str(config_file), "--out", str(tmp_path / "seeded")]) == 0
        assert read_json(tmp_path / "seeded" / "config.json")["train"]["seed"] == 5


class TestBaseline:
    @pytest.mark.parametrize("measure,classifier", [("pi", "dt"), ("crossk", "rf")])
    def test_writes_metrics_and_features(self, data_dir: Path, tmp_path: Path, measure: str, classifier: str) -> None:
        out = tmp_path / f"{measure}-{classifier}"
        assert main(["baseline", "--measure", measure, "--classifier", classifier,
                     "--data", str(data_dir), "--out", str(out), "--thresholds", "10,30"]) == 0
        assert set(METRIC_KEYS) <= set(read_json(out / METRICS_FILE))
        features = pd.read_csv(out / "features.csv")
        assert len(features) == 20


class TestExperiments:
    def test_ablate_emits_every_configuration(self, config_file: Path, tmp_path: Path) -> None:
        assert main(["ablate", "--config", str(config_file), "--out", str(tmp_path)]) == 0
        table = pd.read_csv(tmp_path / "ablation.csv")
        assert list(table["configuration"]) == [row[0] for row in ABLATION_ROWS]
        assert set(METRIC_KEYS) <= set(table.columns)

    def test_sweep_one_row_per_value(self, config_file: Path, tmp_path: Path) -> None:
        assert main(["sweep", "--config", str(config_file), "--param", "k", "--values", "2,4",
                     "--out", str(tmp_path)]) == 0
        table = pd.read_csv(tmp_path / "sweep.csv")
        assert list(table["value"]) == [2, 4]
        assert set(table["param"]) == {"k"}

    def test_interpret_outputs(self, trained: Path, data_dir: Path, tmp_path: Path) -> None:
        assert main(["interpret", "--checkpoint", str(trained / CHECKPOINT_FILE), "--data", str(data_dir),
                     "--out", str(tmp_path), "--top", "5"]) == 0
        importance = pd.read_csv(tmp_path / "pair_importance.csv")
        assert list(importance.columns) == PAIR_IMPORTANCE_COLUMNS
        assert len(importance) == 12
        relationships = pd.read_csv(tmp_path / "relationships.csv")
        assert list(relationships.columns) == RELATIONSHIP_COLUMNS
        assert 1 <= len(relationships) <= 5
        summary = read_json(tmp_path / "interpret.json")
        assert summary["graph_source"] == "feature"
        assert summary["signatures"] >= len(relationships)

    def test_bench(self, trained: Path, data_dir: Path, tmp_path: Path) -> None:
        assert main(["bench", "--checkpoint", str(trained / CHECKPOINT_FILE), "--data", str(data_dir),
                     "--out", str(tmp_path), "--num-points", "12"]) == 0
        result = read_json(tmp_path / "bench.json")
        assert result["samples"] == 20
        assert result["num_points"] == 12
        assert result["mean_seconds"] > 0


class TestErrors:
    def test_missing_config_file(self, tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
        assert main(["train", "--config", str(tmp_path / "absent.json")]) == 1
        assert capsys.readouterr().err.startswith("error:")

    def test_unknown_config_key(self, tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
        payload = run_config(tmp_path / "out")
        payload["model"] = {**TINY_MODEL, "depth": 3}
        config = write_json(tmp_path / "run.json", payload)
        assert main(["train", "--config", str(config)]) == 1
        assert "model.depth" in capsys.readouterr().err

    def test_bad_seed_env(self, config_file: Path, monkeypatch: pytest.MonkeyPatch) -> None:
        monkeypatch.setenv(SEED_ENV_VAR, "abc")
        assert main(["train", "--config", str(config_file)]) == 1

    def test_corrupt_checkpoint(self, data_dir: Path, tmp_path: Path) -> None:
        bad = tmp_path / CHECKPOINT_FILE
        bad.write_bytes(b"not a checkpoint")
        assert main(["eval", "--checkpoint", str(bad), "--data", str(data_dir)]) == 1

    def test_generate_rejects_wrong_value_type(self, tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
        spec = write_json(tmp_path / "corpus.json", {"points_per_pattern": "many"})
        assert main(["generate", "--spec", str(spec), "--out", str(tmp_path / "data")]) == 1
        err = capsys.readouterr().err
        assert err.startswith("error:")
        assert "points_per_pattern" in err
        assert not (tmp_path / "data").exists()

    def test_generate_rejects_class_without_name(self, tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
        spec = write_json(tmp_path / "corpus.json", {**CORPUS, "classes": [{"relationships": []}, {"name": "random"}]})
        assert main(["generate", "--spec", str(spec), "--out", str(tmp_path / "data")]) == 1
        err = capsys.readouterr().err
        assert err.startswith("error:")
        assert "classes[0].name" in err

    def test_train_rejects_wrong_value_type(self, tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
        payload = run_config(tmp_path / "out")
        payload["model"] = {**TINY_MODEL, "layer_widths": [4, "wide"]}
        config = write_json(tmp_path / "run.json", payload)
        assert main(["train", "--config", str(config)]) == 1
        assert "model.layer_widths" in capsys.readouterr().err

    def test_unknown_measure_is_a_usage_error(self, tmp_path: Path) -> None:
        with pytest.raises(SystemExit) as exc:
            main(["baseline", "--measure", "ripley", "--classifier", "dt", "--data", ".", "--out", str(tmp_path)])
        assert exc.value.code == 2


# ---------------------------------------------------------------------------
# Full-size planted-pair corpus
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def full_run(tmp_path_factory: pytest.TempPathFactory) -> tuple[Path, Path, Path]:
    """(config file, data dir, train dir) for the default planted-pair corpus and model."""
    root = tmp_path_factory.mktemp("full")
    spec = write_json(root / "corpus.json", {})
    config = write_json(root / "run.json", {
        "data": {"synthetic": {}},
        "output": {"directory": str(root / "train")},
    })
    with pytest.MonkeyPatch.context() as mp:
        mp.delenv(SEED_ENV_VAR, raising=False)
        assert main(["generate", "--spec", str(spec), "--out", str(root / "data")]) == 0
        assert main(["train", "--config", str(config)]) == 0
    return config, root / "data", root / "train"


def covers_pair(center: str, neighbors: str, pair: set[str]) -> bool:
    return pair <= {center, *neighbors.split("+")}


@pytest.mark.slow
class TestPlantedCorpus:
    def test_model_accuracy(self, full_run: tuple[Path, Path, Path]) -> None:
        _, _, train_dir = full_run
        assert read_json(train_dir / METRICS_FILE)["accuracy"] >= 0.90

    def test_participation_tree_baseline(self, full_run: tuple[Path, Path, Path], tmp_path: Path) -> None:
        _, data, _ = full_run
        assert main(["baseline", "--measure", "pi", "--classifier", "dt", "--data", str(data),
                     "--out", str(tmp_path), "--thresholds", "50"]) == 0
        assert read_json(tmp_path / METRICS_FILE)["accuracy"] >= 0.80

    def test_planted_pair_is_recovered(self, full_run: tuple[Path, Path, Path], tmp_path: Path) -> None:
        _, data, train_dir = full_run
        hits = 0
        for seed in range(5):
            out = tmp_path / f"seed{seed}"
            assert main(["interpret", "--checkpoint", str(train_dir / CHECKPOINT_FILE), "--data", str(data),
                         "--out", str(out), "--seed", str(seed)]) == 0
            top = pd.read_csv(out / "relationships.csv").head(3)
            hits += any(covers_pair(c, n, {"A", "B"}) for c, n in zip(top["center"], top["neighbors"]))
        assert hits >= 4

        importance = pd.read_csv(tmp_path / "seed0" / "pair_importance.csv")
        last = importance[importance["layer"] == importance["layer"].max()]
        off_diagonal = last[last["cat_a"] != last["cat_b"]]
        ab = off_diagonal[(off_diagonal["cat_a"] == "A") & (off_diagonal["cat_b"] == "B")]["importance"].item()
        assert ab >= off_diagonal["importance"].median()

    def test_entire_model_beats_lrfc_only(self, full_run: tuple[Path, Path, Path], tmp_path: Path) -> None:
        config, _, _ = full_run
        assert main(["ablate", "--config", str(config), "--out", str(tmp_path)]) == 0
        table = pd.read_csv(tmp_path / "ablation.csv").set_index("configuration")
        assert len(table) == 7
        assert table.loc["Entire model", "accuracy"] >= table.loc["Only LRFC", "accuracy"]

    def test_bench_scales_with_points(self, full_run: tuple[Path, Path, Path], tmp_path: Path) -> None:
        _, data, train_dir = full_run
        checkpoint = str(train_dir / CHECKPOINT_FILE)
        means = {}
        for n in (256, 1024):
            out = tmp_path / str(n)
            assert main(["bench", "--checkpoint", checkpoint, "--data", str(data), "--out", str(out),
                         "--num-points", str(n)]) == 0
            means[n] = read_json(out / "bench.json")["mean_seconds"]
        assert means[1024] > means[256]
