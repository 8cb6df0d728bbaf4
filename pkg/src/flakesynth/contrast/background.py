"""Substrate background estimation."""

from dataclasses import dataclass

import numpy as np

from ..core.errors import BackgroundEstimationError

HISTOGRAM_BINS = 32
DOWNSAMPLE = 4


@dataclass(frozen=True)
class BackgroundEstimate:
    """Per-channel substrate intensity, in the units of the source image."""

    r: float
    g: float
    b: float

    def __post_init__(self):
        values = self.as_array()
        if not np.all(np.isfinite(values)) or np.any(values <= 0):
            raise BackgroundEstimationError(f"background must be strictly positive, got {values.tolist()}")

    def as_array(self) -> np.ndarray:
        return np.array([self.r, self.g, self.b], dtype=float)


def _value_range(image: np.ndarray) -> float:
    if np.issubdtype(image.dtype, np.integer):
        return float(np.iinfo(image.dtype).max + 1)
    return max(1.0, float(np.nanmax(image)))


def estimate_background(image: np.ndarray) -> BackgroundEstimate:
    """Histogram-mode background of an RGB image.

    Assumes at least half of the pixels show bare substrate. Each channel of a
    4x downsampled copy is binned into 32 bins; the estimate is the mean of
    the pixels that fall within one bin of the most populated one.
    """
    if image.ndim != 3 or image.shape[2] != 3 or image.size == 0:
        raise BackgroundEstimationError(f"expected a non-empty (H, W, 3) image, got shape {image.shape}")
    upper = _value_range(image)
    small = np.asarray(image[::DOWNSAMPLE, ::DOWNSAMPLE], dtype=float).reshape(-1, 3)
    estimate = []
    for channel in range(3):
        values = small[:, channel]
        bins = np.clip((values / upper * HISTOGRAM_BINS).astype(int), 0, HISTOGRAM_BINS - 1)
        mode = int(np.argmax(np.bincount(bins, minlength=HISTOGRAM_BINS)))
        near = values[np.abs(bins - mode) <= 1]
        estimate.append(float(near.mean()))
    if min(estimate) <= 0:
        raise BackgroundEstimationError(f"degenerate image: background estimate {estimate} is not positive")
    return BackgroundEstimate(*estimate)
