"""Flake shape mining and the shape library."""

from .labeling import Component, Labeling, UnionFind, connected_components
from .library import FlakeShape, ShapeLibrary, load_library, save_library
from .mining import (
    default_bands,
    filter_shapes,
    mine_directory,
    mine_image,
    stepped_threshold,
    to_grayscale,
)

__all__ = [
    "Component",
    "Labeling",
    "UnionFind",
    "connected_components",
    "FlakeShape",
    "ShapeLibrary",
    "load_library",
    "save_library",
    "default_bands",
    "filter_shapes",
    "mine_directory",
    "mine_image",
    "stepped_threshold",
    "to_grayscale",
]
