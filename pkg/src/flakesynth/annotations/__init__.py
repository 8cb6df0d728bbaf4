"""Annotation documents and mask encoding."""

from .io import import_dataset, load_annotations, read_dataset, write_annotations
from .rle import rle_decode, rle_encode
from .schemas import (
    BenchmarkReport,
    ClassInfo,
    ClassReport,
    DatasetAnnotations,
    DatasetImageEntry,
    DatasetManifest,
    EvaluationReport,
    ImageAnnotation,
    InstanceAnnotation,
    LibraryManifest,
    PRPoint,
    RLEMask,
    ShapeEntry,
)

__all__ = [
    "import_dataset",
    "load_annotations",
    "read_dataset",
    "write_annotations",
    "rle_decode",
    "rle_encode",
    "BenchmarkReport",
    "ClassInfo",
    "ClassReport",
    "DatasetAnnotations",
    "DatasetImageEntry",
    "DatasetManifest",
    "EvaluationReport",
    "ImageAnnotation",
    "InstanceAnnotation",
    "LibraryManifest",
    "PRPoint",
    "RLEMask",
    "ShapeEntry",
]
