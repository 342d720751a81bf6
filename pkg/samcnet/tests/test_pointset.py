"""
Tests for point-pattern data: CSV I/O, splitting, sampling, rotation
augmentation and the synthetic generator.
"""

import logging
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from samcnet.config import ModelConfig, PlantedRelationship, RunConfig, SyntheticClass, SyntheticSpec
from samcnet.data.io import load_csv, write_csv
from samcnet.data.pattern import CategoryVocabulary, Dataset, PointPattern
from samcnet.data.synthetic import generate_synthetic
from samcnet.data.transforms import augment, report_undersized, rotate, rotate_coords, sample_points, split
from samcnet.errors import ConfigError, ContractViolation, ParseError


def make_dataset(per_class: int = 50, points: int = 12, seed: int = 0) -> Dataset:
    rng = np.random.default_rng(seed)
    vocab = CategoryVocabulary(("A", "B", "C"))
    patterns = []
    for label in (0, 1):
        for i in range(per_class):
            patterns.append(PointPattern(
                f"s{label}-{i:03d}",
                rng.uniform(0, 500, size=(points, 2)),
                rng.integers(0, 3, size=points),
                label,
            ))
    return Dataset(vocab, tuple(patterns), ("neg", "pos"))


@pytest.fixture
def dataset() -> Dataset:
    return make_dataset()


@pytest.fixture
def small_spec() -> SyntheticSpec:
    return SyntheticSpec(
        categories=("A", "B", "C"),
        points_per_pattern=60,
        patterns_per_class=3,
        classes=(
            SyntheticClass("planted", (PlantedRelationship(("A", "B"), 10.0, 0.8),)),
            SyntheticClass("random"),
        ),
        background_intensity=1e-3,
        arena_extent=200.0,
        seed=11,
    )


class TestPatternModel:
    def test_rejects_mismatched_lengths(self) -> None:
        with pytest.raises(ContractViolation):
            PointPattern("x", np.zeros((3, 2)), [0, 1], 0)

    def test_rejects_empty_pattern(self) -> None:
        with pytest.raises(ContractViolation):
            PointPattern("x", np.zeros((0, 2)), [], 0)

    def test_arrays_are_read_only(self, dataset: Dataset) -> None:
        p = dataset.patterns[0]
        with pytest.raises(ValueError):
            p.coords[0, 0] = 1.0

    def test_duplicate_sample_ids_rejected(self) -> None:
        p = PointPattern("dup", np.zeros((2, 2)), [0, 0], 0)
        with pytest.raises(ContractViolation):
            Dataset(CategoryVocabulary(("A",)), (p, p), ("c",))

    def test_vocabulary_sorted_from_names(self) -> None:
        vocab = CategoryVocabulary.from_names(["T", "B", "T", "A"])
        assert vocab.names == ("A", "B", "T")
        assert vocab.id_of("T") == 2


class TestCsv:
    def test_round_trip(self, dataset: Dataset, tmp_path: Path) -> None:
        write_csv(dataset, tmp_path / "points.csv", tmp_path / "labels.csv")
        loaded = load_csv(tmp_path / "points.csv", tmp_path / "labels.csv")

        assert loaded.vocabulary.names == dataset.vocabulary.names
        assert loaded.class_names == dataset.class_names
        assert loaded.sample_ids == dataset.sample_ids
        for a, b in zip(dataset.patterns, loaded.patterns):
            np.testing.assert_array_equal(a.coords, b.coords)
            np.testing.assert_array_equal(a.categories, b.categories)
            assert a.label == b.label

    def test_bad_coordinate_reports_line(self, tmp_path: Path) -> None:
        (tmp_path / "points.csv").write_text(
            "sample_id,x,y,category\n"
            "s1,1.0,2.0,A\n"
            "s1,3.0,4.0,B\n"
            "s1,oops,4.0,B\n",
            encoding="utf-8",
        )
        (tmp_path / "labels.csv").write_text("sample_id,label\ns1,pos\n", encoding="utf-8")
        with pytest.raises(ParseError) as info:
            load_csv(tmp_path / "points.csv", tmp_path / "labels.csv")
        assert info.value.line == 4, str(info.value)

    def test_unlabeled_sample_rejected(self, tmp_path: Path) -> None:
        (tmp_path / "points.csv").write_text(
            "sample_id,x,y,category\ns1,1,2,A\ns2,1,2,A\n", encoding="utf-8"
        )
        (tmp_path / "labels.csv").write_text("sample_id,label\ns1,pos\n", encoding="utf-8")
        with pytest.raises(ParseError) as info:
            load_csv(tmp_path / "points.csv", tmp_path / "labels.csv")
        assert info.value.line == 3

    def test_wrong_header_rejected(self, tmp_path: Path) -> None:
        (tmp_path / "points.csv").write_text("id,x,y,category\ns1,1,2,A\n", encoding="utf-8")
        (tmp_path / "labels.csv").write_text("sample_id,label\ns1,pos\n", encoding="utf-8")
        with pytest.raises(ParseError) as info:
            load_csv(tmp_path / "points.csv", tmp_path / "labels.csv")
        assert info.value.line == 1


class TestSplit:
    def test_sizes(self, dataset: Dataset) -> None:
        train, val, test = split(dataset, seed=0)
        assert (len(train), len(val), len(test)) == (72, 8, 20)

    def test_disjoint_and_complete(self, dataset: Dataset) -> None:
        train, val, test = split(dataset, seed=3)
        ids = train.sample_ids + val.sample_ids + test.sample_ids
        assert sorted(ids) == sorted(dataset.sample_ids)

    def test_stratified(self, dataset: Dataset) -> None:
        _, _, test = split(dataset, seed=5)
        assert list(test.class_counts()) == [10, 10]

    def test_deterministic(self, dataset: Dataset) -> None:
        a = split(dataset, seed=9)
        b = split(dataset, seed=9)
        assert [d.sample_ids for d in a] == [d.sample_ids for d in b]

    def test_small_class_refused(self) -> None:
        with pytest.raises(ContractViolation):
            split(make_dataset(per_class=9), seed=0)


class TestSampling:
    def test_without_replacement(self, dataset: Dataset) -> None:
        p = dataset.patterns[0]
        sampled = sample_points(p, 5, seed=1)
        assert len(sampled) == 5
        rows = {tuple(c) for c in p.coords}
        assert len({tuple(c) for c in sampled.coords}) == 5
        assert {tuple(c) for c in sampled.coords} <= rows

    def test_with_replacement_keeps_every_point(self) -> None:
        p = PointPattern("tiny", np.arange(10.0).reshape(5, 2), [0, 1, 0, 1, 2], 0)
        sampled = sample_points(p, 8, seed=0)
        assert len(sampled) == 8
        np.testing.assert_array_equal(sampled.coords[:5], p.coords)

    def test_deterministic(self, dataset: Dataset) -> None:
        p = dataset.patterns[3]
        np.testing.assert_array_equal(sample_points(p, 6, 2).coords, sample_points(p, 6, 2).coords)

    def test_zero_size_refused(self, dataset: Dataset) -> None:
        with pytest.raises(ContractViolation):
            sample_points(dataset.patterns[0], 0, seed=0)

    def test_category_frequencies_preserved(self) -> None:
        rng = np.random.default_rng(0)
        source = PointPattern(
            "big", rng.uniform(0, 1000, size=(10_000, 2)),
            rng.choice(4, size=10_000, p=[0.4, 0.3, 0.2, 0.1]), 0,
        )
        expected = np.bincount(source.categories, minlength=4) / len(source)
        observed = np.mean([
            np.bincount(sample_points(source, 1024, seed=trial).categories, minlength=4) / 1024
            for trial in range(100)
        ], axis=0)
        np.testing.assert_allclose(observed, expected, rtol=0.05)

    def test_undersized_patterns_logged_once(self, caplog: pytest.LogCaptureFixture) -> None:
        data = make_dataset(per_class=3, points=12)
        with caplog.at_level(logging.DEBUG, logger="samcnet.data.transforms"):
            assert report_undersized(data, 20) == 6
            for p in data.patterns:
                sample_points(p, 20, seed=0)
        info = [r for r in caplog.records if r.levelno >= logging.INFO]
        assert len(info) == 1
        assert info[0].levelno == logging.INFO
        assert "6 of 6" in info[0].getMessage()

    def test_nothing_logged_when_large_enough(self, dataset: Dataset, caplog: pytest.LogCaptureFixture) -> None:
        with caplog.at_level(logging.INFO, logger="samcnet.data.transforms"):
            assert report_undersized(dataset, 12) == 0
        assert not caplog.records


class TestRotation:
    def test_quarter_turn_clockwise(self) -> None:
        out = rotate_coords(np.array([[1.0, 0.0]]), 90.0)
        np.testing.assert_allclose(out, [[0.0, -1.0]], atol=1e-12)

    def test_preserves_pairwise_distances(self, dataset: Dataset) -> None:
        p = dataset.patterns[0]
        r = rotate(p, 36.0)
        d0 = np.linalg.norm(p.coords[:, None] - p.coords[None], axis=-1)
        d1 = np.linalg.norm(r.coords[:, None] - r.coords[None], axis=-1)
        np.testing.assert_allclose(d0, d1, atol=1e-9)
        np.testing.assert_allclose(r.centroid, p.centroid, atol=1e-9)
        np.testing.assert_array_equal(r.categories, p.categories)

    def test_augment_sixfold(self) -> None:
        small = make_dataset(per_class=5)
        out = augment(small)
        assert len(out) == 60
        assert "s0-000@rot12" in out.sample_ids
        assert "s0-000@rot60" in out.sample_ids
        assert list(out.class_counts()) == [30, 30]


class TestSynthetic:
    def test_deterministic(self, small_spec: SyntheticSpec) -> None:
        a = generate_synthetic(small_spec)
        b = generate_synthetic(small_spec)
        for pa, pb in zip(a.patterns, b.patterns):
            np.testing.assert_array_equal(pa.coords, pb.coords)
            np.testing.assert_array_equal(pa.categories, pb.categories)

    def test_shape(self, small_spec: SyntheticSpec) -> None:
        data = generate_synthetic(small_spec)
        assert len(data) == 6
        assert data.class_names == ("planted", "random")
        assert data.vocabulary.names == ("A", "B", "C")
        assert all(len(p) <= 60 for p in data.patterns)

    def test_seed_changes_corpus(self, small_spec: SyntheticSpec) -> None:
        a = generate_synthetic(small_spec)
        b = generate_synthetic(replace(small_spec, seed=12))
        assert not np.array_equal(a.patterns[0].coords, b.patterns[0].coords)

    def test_unknown_category_in_relationship(self) -> None:
        with pytest.raises(ConfigError):
            SyntheticSpec(
                categories=("A", "B"),
                classes=(SyntheticClass("x", (PlantedRelationship(("A", "Z"), 5.0, 0.5),)), SyntheticClass("y")),
            )

    @pytest.mark.parametrize("payload, where", [
        ({"points_per_pattern": "many"}, "points_per_pattern"),
        ({"seed": True}, "seed"),
        ({"categories": "ABC"}, "categories"),
        ({"classes": [{"relationships": []}, {"name": "y"}]}, "name"),
        ({"classes": [{"name": "x", "relationships": [{"categories": ["A", "B"]}]}, {"name": "y"}]}, "radius"),
        ({"classes": [{"name": 3}, {"name": "y"}]}, "name"),
    ])
    def test_malformed_payload_is_config_error(self, payload: dict, where: str) -> None:
        with pytest.raises(ConfigError, match=where):
            SyntheticSpec.from_dict(payload)


class TestRunConfig:
    def test_sampling_follows_synthetic_corpus(self) -> None:
        config = RunConfig.from_dict({"data": {"synthetic": {}}})
        assert config.model.num_points == SyntheticSpec().points_per_pattern

    def test_explicit_point_count_wins(self) -> None:
        config = RunConfig.from_dict({"data": {"synthetic": {}}, "model": {"num_points": 64}})
        assert config.model.num_points == 64

    def test_file_data_keeps_model_default(self) -> None:
        config = RunConfig.from_dict({"data": {"points": "p.csv", "labels": "l.csv"}})
        assert config.model.num_points == ModelConfig().num_points

    @pytest.mark.parametrize("payload", [
        {"model": {"layer_widths": "64"}},
        {"model": {"layer_widths": [64, "wide"]}},
        {"train": {"lr": "fast"}},
        {"model": {"top_k": 2.5}},
        {"output": {"directory": 7}},
    ])
    def test_wrong_types_rejected(self, payload: dict) -> None:
        with pytest.raises(ConfigError):
            RunConfig.from_dict(payload)
