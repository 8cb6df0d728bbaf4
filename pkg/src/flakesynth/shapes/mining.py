"""Flake shape mining from unlabeled microscope images."""

import multiprocessing
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from scipy.spatial import ConvexHull
from tqdm import tqdm

from ..core.config import MiningSettings
from ..core.errors import ConfigError, ShapeLibraryError
from ..core.fileio import list_images, read_rgb
from .labeling import Component, Labeling, connected_components
from .library import FlakeShape, ShapeLibrary

Band = Tuple[int, int]

LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])


def to_grayscale(rgb: np.ndarray) -> np.ndarray:
    """Luminance 0.299 R + 0.587 G + 0.114 B rounded to the nearest integer (uint8)."""
    rgb = np.asarray(rgb)
    if rgb.ndim != 3 or rgb.shape[2] != 3 or rgb.shape[0] == 0 or rgb.shape[1] == 0:
        raise ShapeLibraryError(f"expected a non-empty (H, W, 3) image, got shape {rgb.shape}")
    luma = rgb[..., :3].astype(float) @ LUMA_WEIGHTS
    return np.clip(np.rint(luma), 0, 255).astype(np.uint8)


def validate_bands(bands: Sequence[Band]) -> List[Band]:
    """Sorted non-empty ``[lo, hi)`` bands inside [0, 256) that do not overlap; ``ConfigError`` otherwise."""
    if not bands:
        raise ConfigError("at least one brightness band is required", key="mining.bands")
    ordered = sorted((int(lo), int(hi)) for lo, hi in bands)
    for lo, hi in ordered:
        if not 0 <= lo < hi <= 256:
            raise ConfigError(f"band [{lo}, {hi}) is empty or outside [0, 256)", key="mining.bands")
    for (_, hi), (lo, _) in zip(ordered, ordered[1:]):
        if lo < hi:
            raise ConfigError("brightness bands overlap", key="mining.bands")
    return ordered


def stepped_threshold(gray: np.ndarray, bands: Sequence[Band]) -> List[np.ndarray]:
    """One mask per band (in the given order): pixel set iff lo <= luminance < hi."""
    validate_bands(bands)
    gray = np.asarray(gray)
    return [(gray >= lo) & (gray < hi) for lo, hi in bands]


def default_bands(gray: np.ndarray, count: int = 8, percentile_low: float = 1.0,
                  percentile_high: float = 99.0) -> List[Band]:
    """Equal-width bands over the image's [p_low, p_high] luminance range."""
    lo, hi = np.percentile(gray, [percentile_low, percentile_high])
    edges = np.unique(np.rint(np.linspace(lo, hi + 1, count + 1)).astype(int))
    edges = np.clip(edges, 0, 256)
    bands = [(int(a), int(b)) for a, b in zip(edges, edges[1:]) if b > a]
    if not bands:
        value = int(np.clip(lo, 0, 255))
        bands = [(value, value + 1)]
    return bands


def solidity(crop: np.ndarray) -> float:
    """Pixel area over the area of the convex hull of the pixel squares."""
    rows = np.nonzero(crop.any(axis=1))[0]
    first = crop.argmax(axis=1)[rows]
    last = crop.shape[1] - 1 - crop[:, ::-1].argmax(axis=1)[rows]
    corners = np.concatenate([
        np.column_stack([rows, first]),
        np.column_stack([rows + 1, first]),
        np.column_stack([rows, last + 1]),
        np.column_stack([rows + 1, last + 1]),
    ]).astype(float)
    hull_area = ConvexHull(corners).volume
    return float(crop.sum() / hull_area)


def border_fraction(labeling: Labeling, component: Component) -> float:
    """Share of the component's perimeter pixels lying on the image border."""
    height, width = labeling.labels.shape
    top, left, bottom, right = component.bbox
    crop = labeling.crop(component)
    padded = np.pad(crop, 1)
    interior = padded[1:-1, 1:-1] & padded[:-2, 1:-1] & padded[2:, 1:-1] & padded[1:-1, :-2] & padded[1:-1, 2:]
    perimeter = crop & ~interior
    on_border = np.zeros_like(crop)
    if top == 0:
        on_border[0, :] = True
    if bottom == height:
        on_border[-1, :] = True
    if left == 0:
        on_border[:, 0] = True
    if right == width:
        on_border[:, -1] = True
    return float((perimeter & on_border).sum() / max(perimeter.sum(), 1))


def filter_shapes(labeling: Labeling, gray: np.ndarray, criteria: MiningSettings,
                  source_id: str = "") -> List[FlakeShape]:
    """Keep components passing the area, solidity and border-touch rules as tight crops."""
    image_area = gray.shape[0] * gray.shape[1]
    max_area = criteria.max_area_fraction * image_area
    shapes = []
    for component in labeling.components:
        if not criteria.min_area <= component.area <= max_area:
            continue
        if border_fraction(labeling, component) > criteria.max_border_fraction:
            continue
        crop = labeling.crop(component)
        if solidity(crop) < criteria.min_solidity:
            continue
        shapes.append(FlakeShape(crop, component.area, f"{source_id}#{component.label}"))
    return shapes


def mine_image(rgb: np.ndarray, criteria: MiningSettings, bands: Optional[Sequence[Band]] = None,
               source_id: str = "") -> List[FlakeShape]:
    """Grayscale, stepped threshold, label and filter one image."""
    gray = to_grayscale(rgb)
    if bands is None:
        bands = default_bands(gray, criteria.band_count, criteria.percentile_low, criteria.percentile_high)
    shapes = []
    for index, mask in enumerate(stepped_threshold(gray, bands)):
        labeling = connected_components(mask, criteria.connectivity)
        shapes.extend(filter_shapes(labeling, gray, criteria, f"{source_id}:band{index}"))
    return shapes


def _mine_file(args) -> List[FlakeShape]:
    path, criteria = args
    return mine_image(read_rgb(path), criteria, source_id=Path(path).name)


def mine_directory(input_dir: Path, criteria: MiningSettings, jobs: int = 1) -> ShapeLibrary:
    """Mine every image in a directory; per-image results merge in file-name order."""
    paths = list_images(input_dir)
    if not paths:
        raise ShapeLibraryError(f"no images found in {input_dir}")
    tasks = [(path, criteria) for path in paths]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs, mp_context=multiprocessing.get_context("spawn")) as pool:
            per_image = list(tqdm(pool.map(_mine_file, tasks), total=len(tasks), desc="mining", disable=None))
    else:
        per_image = [_mine_file(task) for task in tqdm(tasks, desc="mining", disable=None)]
    shapes = [shape for found in per_image for shape in found]
    logger.info(f"Mined {len(shapes)} shapes from {len(paths)} images")
    return ShapeLibrary(shapes, criteria=criteria.model_dump(), sources=[p.name for p in paths])
