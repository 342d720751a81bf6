"""
Tests for co-location measures and the baseline classifiers.
"""

from itertools import combinations, product

import numpy as np
import pytest

from samcnet.colocation.classifiers import (
    MlpSettings,
    create_classifier,
    fit_forest,
    fit_mlp,
    fit_tree,
    predict,
)
from samcnet.colocation.measures import (
    ThresholdSet,
    brute_force_pairs,
    cross_k,
    feature_matrix,
    feature_names,
    features,
    features_table,
    neighbor_pairs,
    participation_index,
    participation_ratio,
)
from samcnet.config import PlantedRelationship, SyntheticClass, SyntheticSpec
from samcnet.data.pattern import CategoryVocabulary, Dataset, PointPattern
from samcnet.data.synthetic import generate_synthetic
from samcnet.data.transforms import rotate, split
from samcnet.errors import ContractViolation
from samcnet.tensor.rng import component_rng


def make_pattern(points: dict[int, list[tuple[float, float]]], sample_id: str = "p") -> PointPattern:
    coords, cats = [], []
    for cat, pts in points.items():
        coords.extend(pts)
        cats.extend([cat] * len(pts))
    return PointPattern(sample_id, np.array(coords, dtype=np.float64), cats, 0)


def random_pattern(rng: np.random.Generator, n: int, g: int = 3, extent: float = 10.0) -> PointPattern:
    cats = np.concatenate([np.arange(g), rng.integers(0, g, size=n - g)])
    return PointPattern("r", rng.uniform(0, extent, size=(n, 2)), cats, 0)


def oracle_participation_index(pattern: PointPattern, subset: tuple[int, ...], h: float) -> float:
    """Exhaustive clique enumeration over every combination of one point per category."""
    rows = {c: np.flatnonzero(pattern.categories == c) for c in subset}
    seen = {c: set() for c in subset}
    for combo in product(*(rows[c] for c in subset)):
        pts = pattern.coords[list(combo)]
        if all(np.sqrt(np.sum((pts[a] - pts[b]) ** 2)) <= h for a, b in combinations(range(len(combo)), 2)):
            for c, row in zip(subset, combo):
                seen[c].add(row)
    return min(len(seen[c]) / rows[c].size for c in subset)


@pytest.fixture
def hand_pattern() -> PointPattern:
    # a1 and a2 both reach b1; a3 and b2 are isolated
    return make_pattern({
        0: [(0.0, 0.0), (0.0, 2.0), (10.0, 10.0)],
        1: [(1.0, 1.0), (20.0, 0.0)],
    })


class TestNeighborPairs:
    def test_inclusive_threshold(self) -> None:
        pairs = neighbor_pairs(np.array([[0.0, 0.0]]), np.array([[3.0, 4.0], [3.0, 4.1]]), 5.0)
        assert pairs.tolist() == [[0, 0]]

    def test_matches_brute_force(self) -> None:
        for trial in range(30):
            rng = component_rng(1, "pairs", trial)
            a = np.round(rng.uniform(0, 50, size=(int(rng.integers(1, 200)), 2)))
            b = np.round(rng.uniform(0, 50, size=(int(rng.integers(1, 200)), 2)))
            h = float(rng.integers(1, 10))
            np.testing.assert_array_equal(neighbor_pairs(a, b, h), brute_force_pairs(a, b, h), err_msg=f"trial {trial}")

    def test_empty_side(self) -> None:
        assert neighbor_pairs(np.empty((0, 2)), np.zeros((3, 2)), 1.0).shape == (0, 2)


class TestCrossK:
    def test_single_pair_unit_area(self) -> None:
        pattern = make_pattern({0: [(0.0, 0.0)], 1: [(0.5, 0.0)]})
        assert cross_k(pattern, 0, 1, 1.0, area=1.0) == pytest.approx(1.0)

    def test_no_neighbors(self, hand_pattern: PointPattern) -> None:
        assert cross_k(hand_pattern, 0, 1, 0.5) == 0.0

    def test_missing_category_named(self, hand_pattern: PointPattern) -> None:
        with pytest.raises(ContractViolation, match="category 2"):
            cross_k(hand_pattern, 0, 2, 5.0)

    def test_same_category_excludes_self_pairs(self) -> None:
        pattern = make_pattern({0: [(0.0, 0.0), (1.0, 0.0), (9.0, 0.0)]})
        # ordered pairs within 2: (0,1) and (1,0) over 3*2 ordered pairs
        assert cross_k(pattern, 0, 0, 2.0, area=6.0) == pytest.approx(2.0)

    def test_complete_spatial_randomness(self) -> None:
        for h in (0.05, 0.1):
            values = []
            for seed in range(20):
                rng = component_rng(seed, "csr")
                coords = rng.random((4000, 2))
                pattern = PointPattern("csr", coords, np.repeat([0, 1], 2000), 0)
                values.append(cross_k(pattern, 0, 1, h))
            expected = np.pi * h * h
            assert abs(np.mean(values) - expected) / expected < 0.15, f"h={h}: {np.mean(values)} vs {expected}"

    def test_point_order_invariant(self) -> None:
        rng = np.random.default_rng(2)
        p = random_pattern(rng, 40)
        perm = rng.permutation(40)
        q = p.with_points(p.coords[perm], p.categories[perm])
        assert cross_k(p, 0, 1, 3.0) == cross_k(q, 0, 1, 3.0)


class TestParticipation:
    def test_hand_ratios(self, hand_pattern: PointPattern) -> None:
        assert participation_ratio(hand_pattern, (0, 1), 0, 1.5) == pytest.approx(2 / 3)
        assert participation_ratio(hand_pattern, (0, 1), 1, 1.5) == pytest.approx(1 / 2)
        assert participation_index(hand_pattern, (0, 1), 1.5) == pytest.approx(0.5)

    def test_everyone_participates(self, hand_pattern: PointPattern) -> None:
        assert participation_index(hand_pattern, (0, 1), 100.0) == 1.0

    def test_empty_relation(self, hand_pattern: PointPattern) -> None:
        assert participation_index(hand_pattern, (0, 1), 0.1) == 0.0

    def test_category_outside_subset(self, hand_pattern: PointPattern) -> None:
        with pytest.raises(ContractViolation):
            participation_ratio(hand_pattern, (0, 1), 2, 1.0)

    def test_matches_exhaustive_oracle(self) -> None:
        for trial in range(100):
            rng = component_rng(3, "pi", trial)
            p = random_pattern(rng, int(rng.integers(4, 31)), g=3)
            h = float(rng.uniform(1.0, 5.0))
            for subset in [(0, 1), (0, 2), (1, 2), (0, 1, 2)]:
                assert participation_index(p, subset, h) == oracle_participation_index(p, subset, h), (
                    f"trial {trial} subset {subset}"
                )

    def test_anti_monotone(self) -> None:
        for trial in range(50):
            rng = component_rng(4, "anti", trial)
            p = random_pattern(rng, 25, g=3)
            h = float(rng.uniform(1.0, 6.0))
            full = participation_index(p, (0, 1, 2), h)
            for pair in [(0, 1), (0, 2), (1, 2)]:
                assert full <= participation_index(p, pair, h), f"trial {trial} pair {pair}"

    def test_rotation_invariant(self) -> None:
        rng = np.random.default_rng(5)
        p = random_pattern(rng, 30, g=2)
        a = participation_index(p, (0, 1), 2.5)
        b = participation_index(rotate(p, 48.0), (0, 1), 2.5)
        assert a == b


class TestFeatures:
    def test_length_and_order(self, hand_pattern: PointPattern) -> None:
        vec = features(hand_pattern, "pi", ThresholdSet((1.5, 100.0)), 3)
        assert vec.shape == (12,)
        # pairs (0,1) (0,2) (1,0) (1,2) (2,0) (2,1), two thresholds each; category 2 is absent
        np.testing.assert_allclose(vec, [0.5, 1.0, 0, 0, 0.5, 1.0, 0, 0, 0, 0, 0, 0])

    def test_crossk_length(self, hand_pattern: PointPattern) -> None:
        assert features(hand_pattern, "crossk", [50.0], 2).shape == (2,)

    def test_thresholds_validated(self) -> None:
        with pytest.raises(ContractViolation):
            ThresholdSet((50.0, 25.0))
        with pytest.raises(ContractViolation):
            ThresholdSet(())

    def test_unknown_measure(self, hand_pattern: PointPattern) -> None:
        with pytest.raises(ContractViolation):
            features(hand_pattern, "gcross", [1.0], 2)

    def test_point_order_invariant(self) -> None:
        rng = np.random.default_rng(6)
        p = random_pattern(rng, 40)
        perm = rng.permutation(40)
        q = p.with_points(p.coords[perm], p.categories[perm])
        for measure in ("pi", "crossk"):
            np.testing.assert_array_equal(features(p, measure, [2.0, 4.0], 3), features(q, measure, [2.0, 4.0], 3))

    def test_collinear_pattern_crossk_is_zero(self) -> None:
        flat = make_pattern({0: [(0.0, 0.0), (2.0, 0.0)], 1: [(1.0, 0.0), (5.0, 0.0)]}, "flat")
        with pytest.raises(ContractViolation, match="flat"):
            cross_k(flat, 0, 1, 3.0)
        np.testing.assert_array_equal(features(flat, "crossk", [3.0], 2), [0.0, 0.0])
        # PI needs no area and still scores the pair
        assert features(flat, "pi", [3.0], 2)[0] == 1.0

    def test_collinear_pattern_does_not_stop_the_matrix(self, hand_pattern: PointPattern) -> None:
        flat = make_pattern({0: [(0.0, 0.0), (2.0, 0.0)], 1: [(1.0, 0.0), (5.0, 0.0)]}, "flat")
        data = Dataset(CategoryVocabulary(("A", "B")), (hand_pattern, flat), ("only",))
        table = features_table(data, "crossk", ThresholdSet((3.0,)))
        assert table.loc[1, "A-B@3"] == 0.0
        assert table.loc[0, "A-B@3"] > 0.0

    def test_planted_pair_scores_above_random(self) -> None:
        spec = SyntheticSpec(
            categories=("A", "B"),
            points_per_pattern=200,
            patterns_per_class=4,
            classes=(
                SyntheticClass("planted", (PlantedRelationship(("A", "B"), 30.0, 0.9),)),
                SyntheticClass("random"),
            ),
            background_intensity=1e-4,
            arena_extent=1000.0,
            seed=3,
        )
        data = generate_synthetic(spec)
        scores = {0: [], 1: []}
        for p in data.patterns:
            scores[p.label].append(features(p, "pi", [50.0], 2)[0])
        assert np.mean(scores[0]) > np.mean(scores[1]), scores

    def test_table_columns(self, hand_pattern: PointPattern) -> None:
        data = Dataset(CategoryVocabulary(("A", "B")), (hand_pattern,), ("only",))
        thresholds = ThresholdSet((1.5,))
        table = features_table(data, "pi", thresholds)
        assert list(table.columns) == ["sample_id", "A-B@1.5", "B-A@1.5", "label"]
        assert feature_names(data, thresholds) == ["A-B@1.5", "B-A@1.5"]
        assert table.loc[0, "label"] == "only"


def xor_data(n: int = 200, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(seed)
    signs = rng.choice([-1.0, 1.0], size=(n, 2))
    x = signs + rng.normal(scale=0.1, size=(n, 2))
    y = (signs[:, 0] != signs[:, 1]).astype(np.int64)
    return x, y


def separable_data(n: int = 40) -> tuple[np.ndarray, np.ndarray]:
    x = np.concatenate([np.linspace(0, 1, n // 2), np.linspace(5, 6, n // 2)]).reshape(-1, 1)
    y = np.repeat([0, 1], n // 2)
    return x, y


class TestClassifiers:
    def test_tree_separable(self) -> None:
        x, y = separable_data()
        model = fit_tree(x, y)
        assert np.mean(predict(model, x) == y) == 1.0
        assert model.model.get_depth() <= 2

    def test_unanimous_forest_matches_each_tree(self) -> None:
        x, y = separable_data()
        forest = fit_forest(x, y, seed=1)
        votes = forest.tree_votes(x)
        assert votes.shape == (50, 40)
        assert np.all(votes == votes[0])
        np.testing.assert_array_equal(predict(forest, x), votes[0])

    def test_forest_is_majority_vote(self) -> None:
        x, y = xor_data(seed=2)
        forest = fit_forest(x, y, seed=3, n_trees=15)
        votes = forest.tree_votes(x)
        majority = (votes.sum(axis=0) * 2 > votes.shape[0]).astype(np.int64)
        np.testing.assert_array_equal(forest.predict(x), majority)

    def test_mlp_learns_xor(self) -> None:
        x, y = xor_data()
        settings = MlpSettings(hidden_layers=2, width=32, epochs=200, batch_size=32, lr=1e-2)
        model = fit_mlp(x, y, seed=0, settings=settings)
        assert np.mean(predict(model, x) == y) >= 0.9

    @pytest.mark.parametrize("name", ["dt", "rf", "nn"])
    def test_single_class_refused(self, name: str) -> None:
        model = create_classifier(name, mlp=MlpSettings(hidden_layers=1, width=4, epochs=1))
        with pytest.raises(ContractViolation):
            model.fit(np.zeros((5, 2)), np.zeros(5, dtype=np.int64))

    def test_unknown_classifier(self) -> None:
        with pytest.raises(ContractViolation):
            create_classifier("svm")

    def test_zero_planted_corpus_near_chance(self) -> None:
        hits, total = 0, 0
        thresholds = ThresholdSet((50.0,))
        for seed in range(12):
            spec = SyntheticSpec(
                categories=("A", "B"),
                points_per_pattern=60,
                patterns_per_class=20,
                classes=(SyntheticClass("first"), SyntheticClass("second")),
                background_intensity=1e-3,
                arena_extent=200.0,
                seed=seed,
            )
            train_set, _, test_set = split(generate_synthetic(spec), seed)
            model = fit_tree(feature_matrix(train_set, "pi", thresholds), train_set.labels, seed=seed)
            hits += int(np.sum(predict(model, feature_matrix(test_set, "pi", thresholds)) == test_set.labels))
            total += len(test_set)
        assert 0.3 <= hits / total <= 0.7
