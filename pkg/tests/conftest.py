"""Shared fixtures: bundled optics, a small shape library and tiny synthetic datasets."""

import sys

import numpy as np
import pytest
from loguru import logger

from flakesynth.core.config import load_config
from flakesynth.optics import OpticalSetup, load_dispersion
from flakesynth.scene import generate_dataset
from flakesynth.shapes.library import FlakeShape, ShapeLibrary, save_library

TINY_CONFIG = """
seed = 7

[scene]
material = "graphene"
image_width = 128
image_height = 128
shape_count = [2, 4]
scale = [0.9, 1.1]
layer_counts = [1, 3]
min_instance_area = 60

[postprocess]
residue_coverage = [0.0, 0.0]
shadow_count = [0, 0]
vignette_strength = [0.0, 0.0]
noise_sigma = [0.002, 0.004]

[preprocess]
knn_k = 5
dbscan_eps = 0.1
dbscan_min_pts = 5
background_points = 300
max_points_per_class = 800

[train]
iterations = 300
batch_size = 512
log_every = 100

[detector]
min_area = 60
"""


@pytest.fixture(autouse=True)
def _quiet_logging():
    logger.remove()
    logger.add(sys.stderr, level="WARNING")
    yield


@pytest.fixture(scope="session")
def pipeline_config():
    return load_config()


@pytest.fixture(scope="session")
def optical_setup(pipeline_config):
    return OpticalSetup.from_config(pipeline_config)


@pytest.fixture(scope="session")
def graphene_table(pipeline_config):
    return load_dispersion(pipeline_config.resolve("graphene.txt", "materials"))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def disk_mask(radius: int) -> np.ndarray:
    rows, cols = np.mgrid[-radius:radius + 1, -radius:radius + 1]
    return rows ** 2 + cols ** 2 <= radius ** 2


def ellipse_mask(a: int, b: int) -> np.ndarray:
    rows, cols = np.mgrid[-a:a + 1, -b:b + 1]
    return (rows / a) ** 2 + (cols / b) ** 2 <= 1.0


@pytest.fixture(scope="session")
def shape_library():
    masks = [disk_mask(10), disk_mask(13), ellipse_mask(8, 15), np.ones((14, 20), dtype=bool)]
    return ShapeLibrary(
        [FlakeShape.from_mask(mask, source_id=f"fixture#{index}") for index, mask in enumerate(masks)],
        criteria={"fixture": True},
        sources=["fixture"],
    )


@pytest.fixture(scope="session")
def tiny_config_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("config") / "tiny.toml"
    path.write_text(TINY_CONFIG, encoding="utf-8")
    return path


@pytest.fixture(scope="session")
def tiny_config(tiny_config_file):
    return load_config(tiny_config_file)


@pytest.fixture(scope="session")
def library_dir(tmp_path_factory, shape_library):
    directory = tmp_path_factory.mktemp("library") / "shapes"
    save_library(shape_library, directory)
    return directory


@pytest.fixture(scope="session")
def tiny_dataset(tmp_path_factory, tiny_config, shape_library):
    """Six generated images with ground truth; returns (directory, annotations)."""
    directory = tmp_path_factory.mktemp("datasets") / "train"
    annotations = generate_dataset(tiny_config, shape_library, 6, directory, split="train")
    return directory, annotations
