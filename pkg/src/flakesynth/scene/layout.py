"""Random placement of mined shapes on an empty canvas."""

from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from loguru import logger
from scipy import ndimage

from ..core.config import SceneSettings
from ..shapes.library import FlakeShape, ShapeLibrary


@dataclass(frozen=True, eq=False)
class LayerMap:
    """Per-pixel number of stacked material layers."""

    counts: np.ndarray

    @classmethod
    def empty(cls, height: int, width: int) -> "LayerMap":
        return cls(np.zeros((height, width), dtype=np.int32))

    @property
    def height(self) -> int:
        return int(self.counts.shape[0])

    @property
    def width(self) -> int:
        return int(self.counts.shape[1])

    def add(self, mask: np.ndarray, top: int, left: int, layers: int) -> int:
        """Add ``layers`` where ``mask`` lands on the canvas; returns the number of pixels placed."""
        h, w = mask.shape
        r0, c0 = max(top, 0), max(left, 0)
        r1, c1 = min(top + h, self.height), min(left + w, self.width)
        if r0 >= r1 or c0 >= c1:
            return 0
        clipped = mask[r0 - top:r1 - top, c0 - left:c1 - left]
        self.counts[r0:r1, c0:c1] += clipped.astype(self.counts.dtype) * layers
        return int(clipped.sum())

    def visible_area(self, mask: np.ndarray, top: int, left: int) -> int:
        h, w = mask.shape
        r0, c0 = max(top, 0), max(left, 0)
        r1, c1 = min(top + h, self.height), min(left + w, self.width)
        if r0 >= r1 or c0 >= c1:
            return 0
        return int(mask[r0 - top:r1 - top, c0 - left:c1 - left].sum())


@dataclass(frozen=True)
class Placement:
    shape_index: int
    angle_deg: float
    scale: float
    top: int
    left: int
    layer_count: int
    area: int


def transform_mask(mask: np.ndarray, angle_deg: float, scale: float) -> np.ndarray:
    """Rotate and scale a binary mask with nearest-neighbor resampling, cropped tight."""
    theta = np.deg2rad(angle_deg)
    cos_t, sin_t = np.cos(theta), np.sin(theta)
    forward = scale * np.array([[cos_t, -sin_t], [sin_t, cos_t]])
    h, w = mask.shape
    corners = np.array([[-0.5, -0.5], [-0.5, w - 0.5], [h - 0.5, -0.5], [h - 0.5, w - 0.5]])
    center = np.array([(h - 1) / 2.0, (w - 1) / 2.0])
    mapped = (corners - center) @ forward.T
    extent = mapped.max(axis=0) - mapped.min(axis=0)
    out_shape = tuple(int(v) for v in np.maximum(np.round(extent), 1))
    center_out = np.array([(out_shape[0] - 1) / 2.0, (out_shape[1] - 1) / 2.0])
    inverse = np.linalg.inv(forward)
    # sample a zero-padded copy so edge pixels never depend on the boundary mode
    offset = center + 1.0 - inverse @ center_out
    out = ndimage.affine_transform(
        np.pad(mask, 1).astype(np.uint8), inverse, offset=offset, output_shape=out_shape,
        order=0, mode="constant", cval=0,
    ).astype(bool)
    rows = np.nonzero(out.any(axis=1))[0]
    cols = np.nonzero(out.any(axis=0))[0]
    if rows.size == 0:
        return np.zeros((0, 0), dtype=bool)
    return out[rows[0]:rows[-1] + 1, cols[0]:cols[-1] + 1]


def sample_layer_count(settings: SceneSettings, rng: np.random.Generator) -> int:
    lo, hi = settings.layer_counts
    if settings.layer_weights is None:
        return int(rng.integers(lo, hi + 1))
    weights = np.asarray(settings.layer_weights, dtype=float)
    return int(lo + rng.choice(weights.size, p=weights / weights.sum()))


def sample_scene(settings: SceneSettings, library: ShapeLibrary,
                 rng: np.random.Generator) -> Tuple[LayerMap, List[Placement]]:
    """Scatter a random number of shapes; overlapping placements add their layer counts."""
    library.require_non_empty()
    layer_map = LayerMap.empty(settings.image_height, settings.image_width)
    lo, hi = settings.shape_count
    count = int(rng.integers(lo, hi + 1))
    placements: List[Placement] = []
    skipped = 0
    for _ in range(count):
        placement = _place_one(settings, library, layer_map, rng)
        if placement is None:
            skipped += 1
        else:
            placements.append(placement)
    if skipped:
        logger.warning(f"Skipped {skipped} of {count} shape placements after {settings.max_retries} retries")
    return layer_map, placements


def _place_one(settings: SceneSettings, library: ShapeLibrary, layer_map: LayerMap,
               rng: np.random.Generator) -> Optional[Placement]:
    for _ in range(settings.max_retries + 1):
        index = int(rng.integers(len(library)))
        shape: FlakeShape = library[index]
        angle = float(rng.uniform(*settings.rotation_deg))
        scale = float(rng.uniform(*settings.scale))
        layers = sample_layer_count(settings, rng)
        mask = transform_mask(shape.mask, angle, scale)
        center_row = float(rng.uniform(0, layer_map.height))
        center_col = float(rng.uniform(0, layer_map.width))
        area = int(mask.sum())
        if area == 0:
            continue
        top = int(np.floor(center_row - mask.shape[0] / 2.0))
        left = int(np.floor(center_col - mask.shape[1] / 2.0))
        if layer_map.visible_area(mask, top, left) < settings.min_surviving_fraction * area:
            continue
        placed = layer_map.add(mask, top, left, layers)
        return Placement(index, angle, scale, top, left, layers, placed)
    return None
