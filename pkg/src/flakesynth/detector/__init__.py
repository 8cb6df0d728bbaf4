"""Classical per-pixel flake detector."""

from .detector import (
    NO_CLASS,
    DetectedInstance,
    DetectorParams,
    FlakeDetector,
    classify_pixels,
    detect,
    detect_directory,
    disk,
)

__all__ = [
    "NO_CLASS",
    "DetectedInstance",
    "DetectorParams",
    "FlakeDetector",
    "classify_pixels",
    "detect",
    "detect_directory",
    "disk",
]
