"""Synthetic scene composition, rendering and dataset generation."""

from .dataset import DatasetGenerator, SceneGenerator, SyntheticSample, generate_dataset
from .instances import SceneInstance, class_infos, class_label_for, derive_instances
from .layout import LayerMap, Placement, sample_layer_count, sample_scene, transform_mask
from .noise import fractal_noise, simplex_noise
from .postprocess import postprocess, vignette_factor
from .render import render_scene, to_uint8

__all__ = [
    "DatasetGenerator",
    "SceneGenerator",
    "SyntheticSample",
    "generate_dataset",
    "SceneInstance",
    "class_infos",
    "class_label_for",
    "derive_instances",
    "LayerMap",
    "Placement",
    "sample_layer_count",
    "sample_scene",
    "transform_mask",
    "fractal_noise",
    "simplex_noise",
    "postprocess",
    "vignette_factor",
    "render_scene",
    "to_uint8",
]
