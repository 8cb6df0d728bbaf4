"""Per-pixel classification, morphology and instance extraction."""

import numpy as np
import pytest

from flakesynth.annotations import load_annotations
from flakesynth.detector import (
    NO_CLASS,
    DetectorParams,
    FlakeDetector,
    classify_pixels,
    detect,
    detect_directory,
)
from flakesynth.evaluation import mask_iou
from flakesynth.mixture import LabeledContrastSet, fit_gmm, train_classifier
from flakesynth.optics import ColorLookupTable
from flakesynth.scene import SceneGenerator


@pytest.fixture(scope="module")
def monolayer_lut(pipeline_config, optical_setup, graphene_table):
    material = pipeline_config.material("graphene")
    return ColorLookupTable(optical_setup, graphene_table, material, 90.0)


def to_uint8(color):
    return np.clip(np.rint(np.asarray(color) * 255.0), 0, 255).astype(np.uint8)


@pytest.fixture(scope="module")
def square_scene(monolayer_lut):
    background, flake = to_uint8(monolayer_lut.color(0)), to_uint8(monolayer_lut.color(1))
    image = np.tile(background, (256, 256, 1))
    truth = np.zeros((256, 256), dtype=bool)
    truth[100:150, 90:140] = True
    image[truth] = flake
    return image, truth, background, flake


@pytest.fixture(scope="module")
def monolayer_gmm(square_scene):
    _, _, background, flake = square_scene
    rng = np.random.default_rng(0)
    contrast = flake.astype(float) / background.astype(float) - 1.0
    points = np.vstack([rng.normal(0.0, 0.02, (400, 3)), rng.normal(contrast, 0.02, (400, 3))])
    labels = np.repeat([0, 1], 400)
    return fit_gmm(LabeledContrastSet(points, labels, [0, 1], ["background", "1 layer"]))


@pytest.fixture(scope="module")
def tiny_gmm(tiny_dataset, tiny_config):
    directory, annotations = tiny_dataset
    return train_classifier("gmm", annotations, directory, tiny_config)


class TestDetectorParams:
    def test_defaults(self):
        params = DetectorParams()
        assert (params.min_area, params.opening_radius, params.rejection) == (200, 1, True)

    def test_min_area_positive(self):
        with pytest.raises(ValueError):
            DetectorParams(min_area=0)

    def test_radius_non_negative(self):
        with pytest.raises(ValueError):
            DetectorParams(opening_radius=-1)

    def test_from_settings(self, tiny_config):
        assert DetectorParams.from_settings(tiny_config.detector).min_area == 60


class TestDetect:
    def test_bare_substrate_is_empty(self, square_scene, monolayer_gmm):
        _, _, background, _ = square_scene
        image = np.tile(background, (64, 64, 1))
        assert detect(image, monolayer_gmm, DetectorParams()) == []

    def test_single_monolayer_square(self, square_scene, monolayer_gmm):
        image, truth, _, _ = square_scene
        instances = detect(image, monolayer_gmm, DetectorParams())
        assert len(instances) == 1
        assert instances[0].class_id == 1
        assert mask_iou(instances[0].mask, truth) >= 0.9
        assert 0.0 <= instances[0].confidence <= 1.0
        assert instances[0].area == int(instances[0].mask.sum())

    def test_area_filter(self, square_scene, monolayer_gmm):
        image, _, _, _ = square_scene
        assert detect(image, monolayer_gmm, DetectorParams(min_area=10_000)) == []

    def test_annotation_round_trip(self, square_scene, monolayer_gmm):
        image, _, _, _ = square_scene
        instance = detect(image, monolayer_gmm, DetectorParams())[0]
        annotation = instance.annotation()
        assert np.array_equal(annotation.segmentation.decode(), instance.mask)
        assert annotation.score == instance.confidence

    def test_background_maps_to_no_class(self, square_scene, monolayer_gmm):
        image, truth, _, _ = square_scene
        class_map, confidence = classify_pixels(image, monolayer_gmm)
        assert np.all(class_map[~truth] == NO_CLASS)
        assert np.all(class_map[truth] == 1)
        assert confidence.shape == truth.shape


class TestGeneratedImages:
    def test_finds_instances(self, tiny_config, shape_library, tiny_gmm):
        sample = SceneGenerator(tiny_config, shape_library).generate(100)
        instances = detect(sample.image, tiny_gmm, DetectorParams.from_settings(tiny_config.detector))
        assert instances
        known = set(tiny_gmm.class_ids)
        assert all(instance.class_id in known for instance in instances)

    def test_instances_are_disjoint_and_argmax_consistent(self, tiny_config, shape_library, tiny_gmm):
        sample = SceneGenerator(tiny_config, shape_library).generate(101)
        params = DetectorParams(min_area=20)
        class_map, _ = classify_pixels(sample.image, tiny_gmm, params.rejection)
        instances = detect(sample.image, tiny_gmm, params)
        for instance in instances:
            assert np.all(class_map[instance.mask] == instance.class_id)
        for i, a in enumerate(instances):
            for b in instances[i + 1:]:
                if a.class_id == b.class_id:
                    assert not np.any(a.mask & b.mask)

    def test_min_area_monotone(self, tiny_config, shape_library, tiny_gmm):
        image = SceneGenerator(tiny_config, shape_library).generate(102).image
        counts = [len(detect(image, tiny_gmm, DetectorParams(min_area=area))) for area in (1, 20, 60, 200, 1000)]
        assert counts == sorted(counts, reverse=True)


class TestDirectory:
    def test_reference_ids_reused(self, tiny_dataset, tiny_gmm, tiny_config):
        directory, annotations = tiny_dataset
        detections = detect_directory(tiny_gmm, directory, DetectorParams.from_settings(tiny_config.detector),
                                      reference=annotations)
        assert detections.kind == "detections"
        assert [image.id for image in detections.images] == [image.id for image in annotations.images]
        assert all(info.id != 0 for info in detections.classes)

    def test_parallel_matches_serial(self, tiny_dataset, tiny_gmm, tiny_config):
        directory, _ = tiny_dataset
        annotations = load_annotations(directory / "annotations.json")
        params = DetectorParams.from_settings(tiny_config.detector)
        serial = detect_directory(tiny_gmm, directory, params, reference=annotations)
        parallel = detect_directory(tiny_gmm, directory, params, jobs=2, reference=annotations)
        assert serial.model_dump() == parallel.model_dump()

    def test_detect_file_keys_by_stem(self, tiny_dataset, tiny_gmm):
        directory, annotations = tiny_dataset
        first = annotations.images[0]
        result = FlakeDetector(tiny_gmm, DetectorParams()).detect_file(directory / first.file_name)
        assert result.id == (directory / first.file_name).stem
        assert (result.height, result.width) == (first.height, first.width)
