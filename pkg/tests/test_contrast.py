"""Background estimation and contrast projection."""

import numpy as np
import pytest

from flakesynth.contrast import (
    BackgroundEstimate,
    erode_mask,
    estimate_background,
    extract_instance_contrasts,
    to_contrast,
)
from flakesynth.core.errors import BackgroundEstimationError, ContrastError
from flakesynth.optics import ColorLookupTable, OpticalSetup, load_dispersion
from flakesynth.scene import SceneGenerator


def substrate_image(value=(120, 100, 140), size=64):
    return np.tile(np.asarray(value, dtype=np.uint8), (size, size, 1))


class TestEstimateBackground:
    def test_uniform_image(self):
        estimate = estimate_background(substrate_image())
        assert estimate.as_array().tolist() == [120.0, 100.0, 140.0]

    def test_ignores_flake_minority(self):
        image = substrate_image()
        image[10:30, 10:30] = (60, 50, 70)
        estimate = estimate_background(image)
        assert np.allclose(estimate.as_array(), [120, 100, 140])

    def test_robust_to_noise(self):
        rng = np.random.default_rng(0)
        noisy = substrate_image().astype(float) + rng.normal(0, 2, (64, 64, 3))
        image = np.clip(np.rint(noisy), 0, 255).astype(np.uint8)
        assert np.allclose(estimate_background(image).as_array(), [120, 100, 140], atol=1.0)

    def test_float_image(self):
        image = np.full((32, 32, 3), 0.4)
        assert np.allclose(estimate_background(image).as_array(), 0.4)

    def test_black_image(self):
        with pytest.raises(BackgroundEstimationError):
            estimate_background(np.zeros((16, 16, 3), dtype=np.uint8))

    def test_bad_shape(self):
        with pytest.raises(BackgroundEstimationError):
            estimate_background(np.zeros((16, 16), dtype=np.uint8))

    def test_estimate_must_be_positive(self):
        with pytest.raises(BackgroundEstimationError):
            BackgroundEstimate(1.0, 0.0, 1.0)


class TestContrast:
    def test_background_pixel_is_zero(self):
        image = substrate_image()
        contrast = to_contrast(image, estimate_background(image))
        assert np.all(contrast.data == 0.0)

    def test_weber_formula(self):
        image = substrate_image()
        image[0, 0] = (60, 150, 140)
        contrast = to_contrast(image, BackgroundEstimate(120.0, 100.0, 140.0))
        assert contrast.data[0, 0].tolist() == [-0.5, 0.5, 0.0]

    def test_points_row_major(self):
        image = substrate_image(size=4)
        image[1, 2] = (0, 0, 0)
        points = to_contrast(image, BackgroundEstimate(120.0, 100.0, 140.0)).points()
        assert points.shape == (16, 3)
        assert points[1 * 4 + 2].tolist() == [-1.0, -1.0, -1.0]


class TestInstanceContrasts:
    def test_erosion_drops_rim(self):
        mask = np.zeros((10, 10), dtype=bool)
        mask[2:7, 2:7] = True
        assert erode_mask(mask).sum() == 9

    def test_thin_mask_kept_when_erosion_empties_it(self):
        mask = np.zeros((10, 10), dtype=bool)
        mask[4, 1:9] = True
        assert np.array_equal(erode_mask(mask), mask)

    def test_extracts_masked_pixels(self):
        image = substrate_image(size=10)
        image[2:7, 2:7] = (60, 50, 70)
        contrast = to_contrast(image, BackgroundEstimate(120.0, 100.0, 140.0))
        mask = np.zeros((10, 10), dtype=bool)
        mask[2:7, 2:7] = True
        points = extract_instance_contrasts(contrast, mask)
        assert points.shape == (9, 3)
        assert np.allclose(points, -0.5)
        assert extract_instance_contrasts(contrast, mask, erode=False).shape == (25, 3)

    def test_shape_mismatch(self):
        contrast = to_contrast(substrate_image(size=8), BackgroundEstimate(1.0, 1.0, 1.0))
        with pytest.raises(ContrastError):
            extract_instance_contrasts(contrast, np.ones((4, 4), dtype=bool))

    def test_empty_mask(self):
        contrast = to_contrast(substrate_image(size=8), BackgroundEstimate(1.0, 1.0, 1.0))
        with pytest.raises(ContrastError):
            extract_instance_contrasts(contrast, np.zeros((8, 8), dtype=bool))

    def test_solid_square_erodes_to_inner_square(self):
        contrast = to_contrast(substrate_image(size=20), BackgroundEstimate(1.0, 1.0, 1.0))
        mask = np.zeros((20, 20), dtype=bool)
        mask[5:15, 5:15] = True
        assert extract_instance_contrasts(contrast, mask).shape == (64, 3)

    def test_single_pixel_mask(self):
        contrast = to_contrast(substrate_image(size=8), BackgroundEstimate(1.0, 1.0, 1.0))
        mask = np.zeros((8, 8), dtype=bool)
        mask[3, 3] = True
        assert extract_instance_contrasts(contrast, mask).shape == (1, 3)


def test_double_intensity_is_unit_contrast():
    image = np.full((4, 4, 3), 0.8)
    assert np.allclose(to_contrast(image, BackgroundEstimate(0.4, 0.4, 0.4)).data, 1.0)


def test_scale_invariant():
    rng = np.random.default_rng(2)
    image = rng.uniform(0.1, 1.0, (8, 8, 3))
    background = BackgroundEstimate(0.5, 0.6, 0.7)
    scaled = BackgroundEstimate(*(background.as_array() * 3.0))
    assert np.allclose(to_contrast(image, background).data, to_contrast(image * 3.0, scaled).data)


def test_background_of_generated_sample(tiny_config, shape_library):
    sample = SceneGenerator(tiny_config, shape_library).generate(0)
    material = tiny_config.material()
    lut = ColorLookupTable(
        OpticalSetup.from_config(tiny_config),
        load_dispersion(tiny_config.resolve(material.dispersion, "materials")),
        material,
        sample.metadata["oxide_thickness_nm"],
    )
    expected = lut.color(0) * 255.0
    assert np.allclose(estimate_background(sample.image).as_array(), expected, atol=2.0)
