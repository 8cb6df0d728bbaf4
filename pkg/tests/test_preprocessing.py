"""Contrast set handling and the preprocessing chain, checked against brute-force references."""

import numpy as np
import pytest

from flakesynth.annotations import load_annotations
from flakesynth.core.config import PostprocessSettings, PreprocessSettings
from flakesynth.core.errors import PreprocessError
from flakesynth.mixture import (
    BACKGROUND_CLASS,
    LabeledContrastSet,
    Standardizer,
    balance_classes,
    collect_contrasts,
    dbscan_filter,
    knn_denoise,
    preprocess,
    select_few_shot_subset,
    standardize_fit_apply,
)
from flakesynth.scene import generate_dataset


def make_set(points, labels, names=None):
    labels = np.asarray(labels)
    count = int(labels.max()) + 1
    names = names or [f"c{i}" for i in range(count)]
    return LabeledContrastSet(np.asarray(points, dtype=float), labels, list(range(count)), names)


def two_clusters(rng, n=100, spread=0.1, gap=5.0):
    a = rng.normal(0.0, spread, (n, 3))
    b = rng.normal(gap, spread, (n, 3))
    return np.vstack([a, b]), np.repeat([0, 1], n)


def brute_force_knn_keep(points, labels, k):
    distances = np.linalg.norm(points[:, None, :] - points[None, :, :], axis=2)
    np.fill_diagonal(distances, np.inf)
    keep = []
    for i in range(len(points)):
        neighbors = np.argsort(distances[i], kind="stable")[:k]
        votes = np.bincount(labels[neighbors], minlength=labels.max() + 1)
        keep.append(votes[labels[i]] == votes.max())
    return np.array(keep)


def naive_dbscan_noise(points, eps, min_pts):
    """Noise flags of textbook DBSCAN with O(n^2) neighborhoods (neighborhood includes the point)."""
    distances = np.linalg.norm(points[:, None, :] - points[None, :, :], axis=2)
    neighbors = [np.nonzero(row <= eps)[0] for row in distances]
    core = np.array([len(n) >= min_pts for n in neighbors])
    reachable = core.copy()
    for i in np.nonzero(core)[0]:
        reachable[neighbors[i]] = True
    return ~reachable


class TestLabeledContrastSet:
    def test_validates_lengths(self):
        with pytest.raises(PreprocessError):
            LabeledContrastSet(np.zeros((3, 3)), np.zeros(2), [0], ["a"])

    def test_validates_label_range(self):
        with pytest.raises(PreprocessError):
            LabeledContrastSet(np.zeros((2, 3)), np.array([0, 2]), [0, 1], ["a", "b"])

    def test_counts(self):
        data = make_set(np.zeros((5, 3)), [0, 1, 1, 0, 1])
        assert data.counts().tolist() == [2, 3]


class TestKnnDenoise:
    def test_clean_clusters_unchanged(self, rng):
        points, labels = two_clusters(rng)
        assert len(knn_denoise(make_set(points, labels), 5)) == 200

    def test_mislabeled_point_dropped(self, rng):
        points, labels = two_clusters(rng)
        labels[3] = 1
        out = knn_denoise(make_set(points, labels), 5)
        assert len(out) == 199
        assert not any(np.array_equal(p, points[3]) for p in out.points)

    def test_flipped_labels_mostly_removed(self):
        rng = np.random.default_rng(42)
        points, labels = two_clusters(rng, n=250, spread=1.0, gap=6.0)
        flipped = rng.choice(500, 25, replace=False)
        noisy = labels.copy()
        noisy[flipped] = 1 - noisy[flipped]
        out = knn_denoise(make_set(points, noisy), 10)
        kept = {tuple(p) for p in out.points}
        flipped_removed = np.mean([tuple(points[i]) not in kept for i in flipped])
        clean = np.setdiff1d(np.arange(500), flipped)
        clean_removed = np.mean([tuple(points[i]) not in kept for i in clean])
        assert flipped_removed >= 0.8
        assert clean_removed <= 0.05

    def test_matches_brute_force(self):
        rng = np.random.default_rng(8)
        points = rng.normal(size=(300, 3))
        labels = (points[:, 0] + 0.5 * rng.normal(size=300) > 0).astype(int)
        out = knn_denoise(make_set(points, labels), 7)
        expected = points[brute_force_knn_keep(points, labels, 7)]
        assert np.array_equal(out.points, expected)

    def test_too_few_points(self):
        with pytest.raises(PreprocessError):
            knn_denoise(make_set(np.zeros((5, 3)), [0, 0, 1, 1, 1]), 5)

    def test_second_pass_never_grows(self, rng):
        points, labels = two_clusters(rng, spread=2.0, gap=3.0)
        once = knn_denoise(make_set(points, labels), 5)
        twice = knn_denoise(once, 5)
        assert len(twice) <= len(once)


class TestDbscanFilter:
    def test_dense_cluster_unchanged(self, rng):
        points = rng.normal(0, 0.01, (100, 3))
        assert len(dbscan_filter(make_set(points, np.zeros(100, dtype=int)), 0.1, 5)) == 100

    def test_isolated_point_removed(self, rng):
        points = np.vstack([rng.normal(0, 0.01, (50, 3)), [[10.0, 10.0, 10.0]]])
        out = dbscan_filter(make_set(points, np.zeros(51, dtype=int)), 0.1, 5)
        assert len(out) == 50
        assert out.points.max() < 1.0

    def test_matches_naive_reference(self):
        rng = np.random.default_rng(17)
        points = np.vstack([rng.normal(0, 0.3, (150, 3)), rng.uniform(-3, 3, (50, 3))])
        out = dbscan_filter(make_set(points, np.zeros(200, dtype=int)), 0.4, 6)
        expected = points[~naive_dbscan_noise(points, 0.4, 6)]
        assert np.array_equal(out.points, expected)

    def test_empty_class_named(self, rng):
        points = np.vstack([rng.normal(0, 0.01, (20, 3)), rng.uniform(-50, 50, (5, 3))])
        labels = np.array([0] * 20 + [1] * 5)
        with pytest.raises(PreprocessError, match="thin"):
            dbscan_filter(make_set(points, labels, names=["dense", "thin"]), 0.1, 5)


class TestStandardize:
    def test_population_convention(self):
        data = make_set([[-1.0], [1.0]], [0, 0])
        out, standardizer = standardize_fit_apply(data)
        assert out.points.ravel().tolist() == [-1.0, 1.0]
        assert standardizer.std.tolist() == [1.0]

    def test_moments(self):
        rng = np.random.default_rng(4)
        data = make_set(rng.normal([1, -2, 3], [0.5, 2.0, 0.1], (1000, 3)), np.zeros(1000, dtype=int))
        out, _ = standardize_fit_apply(data)
        assert np.all(np.abs(out.points.mean(axis=0)) < 1e-9)
        assert np.all(np.abs(out.points.std(axis=0) - 1) < 1e-9)

    def test_shift_invariant(self):
        rng = np.random.default_rng(5)
        points = rng.normal(size=(50, 3))
        a, _ = standardize_fit_apply(make_set(points, np.zeros(50, dtype=int)))
        b, _ = standardize_fit_apply(make_set(points + [3.0, -7.0, 0.5], np.zeros(50, dtype=int)))
        assert np.allclose(a.points, b.points)

    def test_zero_variance(self):
        with pytest.raises(PreprocessError):
            Standardizer.fit(np.array([[1.0, 2.0], [1.0, 3.0]]))

    def test_dict_round_trip(self):
        standardizer = Standardizer(np.array([0.1, 0.2, 0.3]), np.array([1.5, 2.5, 3.5]))
        again = Standardizer.from_dict(standardizer.to_dict())
        assert np.array_equal(again.mean, standardizer.mean)
        assert np.array_equal(again.std, standardizer.std)


class TestBalance:
    def test_upsamples_minority(self, rng):
        points = rng.normal(size=(110, 3))
        labels = np.array([0] * 10 + [1] * 100)
        out = balance_classes(make_set(points, labels), rng)
        assert out.counts().tolist() == [100, 100]
        minority = {tuple(p) for p in points[:10]}
        assert all(tuple(p) in minority for p in out.points[out.labels == 0])

    def test_balanced_unchanged(self, rng):
        data = make_set(rng.normal(size=(20, 3)), [0] * 10 + [1] * 10)
        assert balance_classes(data, rng) is data

    def test_empty_class(self, rng):
        data = LabeledContrastSet(rng.normal(size=(4, 3)), np.zeros(4), [0, 1], ["a", "b"])
        with pytest.raises(PreprocessError, match="class .b."):
            balance_classes(data, rng)


def test_chain_order_and_output(rng):
    points, labels = two_clusters(rng, n=60, spread=0.02, gap=1.0)
    points = np.vstack([points, rng.normal(0.0, 0.02, (20, 3)) + 1.0])
    labels = np.concatenate([labels, np.ones(20, dtype=int)])
    data, standardizer = preprocess(make_set(points, labels),
                                    PreprocessSettings(knn_k=5, dbscan_eps=0.1, dbscan_min_pts=5), rng)
    assert data.counts().tolist() == [80, 80]
    assert np.allclose(standardizer.apply(points).mean(axis=0), 0.0, atol=1e-9)


class TestCollect:
    def test_collects_every_class_and_background(self, tiny_dataset):
        directory, annotations = tiny_dataset
        data = collect_contrasts(annotations, directory, background_points=100, rng=np.random.default_rng(0))
        present = sorted(class_id for class_id, count in annotations.class_counts().items() if count > 0)
        assert data.class_ids == [BACKGROUND_CLASS.id] + present
        assert data.counts()[0] == 100 * len(annotations.images)
        assert np.all(np.abs(data.points[data.labels == 0]) < 0.1)

    def test_background_skips_dropped_flakes(self, tmp_path, tiny_config, shape_library):
        config = tiny_config.model_copy(update={
            "scene": tiny_config.scene.model_copy(update={"min_instance_area": 400}),
            "postprocess": PostprocessSettings.disabled(),
        })
        directory = tmp_path / "dropped"
        annotations = generate_dataset(config, shape_library, 6, directory)
        with_ignored = [image for image in annotations.images if image.ignore is not None]
        assert with_ignored
        for image in with_ignored:
            data = collect_contrasts(annotations, directory, image_ids=[image.id], erode=False,
                                     background_points=10 ** 6)
            background = data.points[data.labels == 0]
            expected = (image.height * image.width
                        - sum(instance.area for instance in image.instances) - image.ignore.decode().sum())
            assert len(background) == expected
            assert np.allclose(np.ptp(background, axis=0), 0.0, atol=1e-12)

    def test_restricted_to_image_ids(self, tiny_dataset):
        directory, annotations = tiny_dataset
        first = annotations.images[0]
        data = collect_contrasts(annotations, directory, image_ids=[first.id], erode=False)
        assert len(data) == sum(instance.area for instance in first.instances)

    def test_cap_per_class(self, tiny_dataset):
        directory, annotations = tiny_dataset
        data = collect_contrasts(annotations, directory, max_points_per_class=25, rng=np.random.default_rng(0))
        assert data.counts().max() <= 25


class TestFewShotSubset:
    def test_every_class_covered(self, tiny_dataset):
        directory, _ = tiny_dataset
        annotations = load_annotations(directory / "annotations.json")
        ids = select_few_shot_subset(annotations, 1, np.random.default_rng(0))
        chosen = annotations.subset(ids)
        for class_id, count in annotations.class_counts().items():
            if count:
                assert chosen.class_counts()[class_id] >= 1

    def test_seeded(self, tiny_dataset):
        _, annotations = tiny_dataset
        a = select_few_shot_subset(annotations, 2, np.random.default_rng(5))
        b = select_few_shot_subset(annotations, 2, np.random.default_rng(5))
        assert a == b

    def test_invalid_count(self, tiny_dataset):
        _, annotations = tiny_dataset
        with pytest.raises(PreprocessError):
            select_few_shot_subset(annotations, 0, np.random.default_rng(0))
