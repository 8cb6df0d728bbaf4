"""Contrast-space projection of microscope images."""

from .background import BackgroundEstimate, estimate_background
from .projection import ContrastImage, erode_mask, extract_instance_contrasts, to_contrast

__all__ = [
    "BackgroundEstimate",
    "estimate_background",
    "ContrastImage",
    "erode_mask",
    "extract_instance_contrasts",
    "to_contrast",
]
