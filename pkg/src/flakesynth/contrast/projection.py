"""Weber contrast images and per-instance contrast samples."""

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from ..core.errors import ContrastError
from .background import BackgroundEstimate


@dataclass(frozen=True, eq=False)
class ContrastImage:
    data: np.ndarray

    @property
    def height(self) -> int:
        return int(self.data.shape[0])

    @property
    def width(self) -> int:
        return int(self.data.shape[1])

    def points(self) -> np.ndarray:
        """All pixels as an (H*W, 3) array in row-major order."""
        return self.data.reshape(-1, 3)


def to_contrast(image: np.ndarray, background: BackgroundEstimate) -> ContrastImage:
    """Per channel ``(I - B) / B``."""
    reference = background.as_array()
    data = (np.asarray(image, dtype=float) - reference) / reference
    return ContrastImage(data)


def erode_mask(mask: np.ndarray) -> np.ndarray:
    """1-pixel erosion, or the mask itself when erosion would leave nothing."""
    eroded = ndimage.binary_erosion(mask, structure=np.ones((3, 3), dtype=bool))
    return eroded if eroded.any() else mask


def extract_instance_contrasts(contrast: ContrastImage, mask: np.ndarray, erode: bool = True) -> np.ndarray:
    """(N, 3) contrast values of the pixels under ``mask``."""
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != contrast.data.shape[:2]:
        raise ContrastError(f"mask shape {mask.shape} does not match contrast image {contrast.data.shape[:2]}")
    if not mask.any():
        raise ContrastError("cannot extract contrasts from an empty mask")
    if erode:
        mask = erode_mask(mask)
    return contrast.data[mask]
