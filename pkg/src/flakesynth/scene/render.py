"""Color rendering of layer maps through a per-scene lookup table."""

from typing import Tuple

import numpy as np

from ..core.config import MaterialSettings
from ..optics.color import ColorLookupTable, OpticalSetup
from ..optics.dispersion import DispersionTable
from .layout import LayerMap


def render_scene(layer_map: LayerMap, substrate_thickness: float, material: DispersionTable,
                 material_settings: MaterialSettings, setup: OpticalSetup) -> Tuple[np.ndarray, ColorLookupTable]:
    """Float RGB image in [0, 1]; one optics evaluation per distinct layer count."""
    lut = ColorLookupTable(setup, material, material_settings, substrate_thickness)
    levels, inverse = np.unique(layer_map.counts, return_inverse=True)
    palette = lut.colors(levels)
    image = palette[inverse.reshape(-1)].reshape(layer_map.height, layer_map.width, 3)
    return image, lut


def to_uint8(image: np.ndarray) -> np.ndarray:
    return np.rint(np.clip(image, 0.0, 1.0) * 255.0).astype(np.uint8)
