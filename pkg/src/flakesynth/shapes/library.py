"""Flake shapes and the on-disk shape library."""

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from loguru import logger
from pydantic import ValidationError

from ..annotations.schemas import LibraryManifest, ShapeEntry
from ..core.errors import ShapeLibraryError
from ..core.fileio import atomic_directory, encode_png, read_bitmap


def is_tight(mask: np.ndarray) -> bool:
    """True when every border row and column of ``mask`` holds a set pixel."""
    return bool(mask[0, :].any() and mask[-1, :].any() and mask[:, 0].any() and mask[:, -1].any())


@dataclass(frozen=True, eq=False)
class FlakeShape:
    """Tightly cropped binary silhouette of a mined flake."""

    mask: np.ndarray
    area: int
    source_id: str = ""

    def __post_init__(self):
        mask = np.asarray(self.mask, dtype=bool)
        object.__setattr__(self, "mask", mask)
        if mask.ndim != 2 or mask.size == 0:
            raise ShapeLibraryError(f"shape {self.source_id}: mask must be a non-empty 2D array")
        if int(mask.sum()) != self.area or self.area < 1:
            raise ShapeLibraryError(f"shape {self.source_id}: area {self.area} != set pixels {int(mask.sum())}")
        if not is_tight(mask):
            raise ShapeLibraryError(f"shape {self.source_id}: mask is not a tight crop")

    @classmethod
    def from_mask(cls, mask: np.ndarray, source_id: str = "") -> "FlakeShape":
        """Crop ``mask`` to its bounding box."""
        mask = np.asarray(mask, dtype=bool)
        rows = np.nonzero(mask.any(axis=1))[0]
        cols = np.nonzero(mask.any(axis=0))[0]
        if rows.size == 0:
            raise ShapeLibraryError(f"shape {source_id}: empty mask")
        crop = mask[rows[0]:rows[-1] + 1, cols[0]:cols[-1] + 1]
        return cls(crop, int(crop.sum()), source_id)


class ShapeLibrary:
    """Immutable collection of mined shapes with provenance."""

    def __init__(self, shapes: Sequence[FlakeShape], criteria: Optional[Dict[str, Any]] = None,
                 sources: Optional[List[str]] = None):
        self._shapes = tuple(shapes)
        self.criteria = dict(criteria or {})
        self.sources = list(sources or [])

    def __len__(self) -> int:
        return len(self._shapes)

    def __getitem__(self, index: int) -> FlakeShape:
        return self._shapes[index]

    def __iter__(self):
        return iter(self._shapes)

    @property
    def shapes(self):
        return self._shapes

    def require_non_empty(self) -> None:
        if not self._shapes:
            raise ShapeLibraryError("shape library is empty")

    def manifest(self) -> LibraryManifest:
        return LibraryManifest(
            shape_count=len(self._shapes),
            criteria=self.criteria,
            sources=self.sources,
            shapes=[
                ShapeEntry(file=f"shapes/{index:06d}.png", area=shape.area,
                           height=shape.mask.shape[0], width=shape.mask.shape[1], source_id=shape.source_id)
                for index, shape in enumerate(self._shapes)
            ],
        )


def save_library(library: ShapeLibrary, directory: Path) -> LibraryManifest:
    """Write ``manifest.json`` plus one 1-bit PNG per shape, replacing ``directory`` atomically."""
    manifest = library.manifest()
    with atomic_directory(directory) as scratch:
        (scratch / "shapes").mkdir()
        for entry, shape in zip(manifest.shapes, library):
            (scratch / entry.file).write_bytes(encode_png(shape.mask))
        (scratch / "manifest.json").write_text(manifest.model_dump_json(indent=2), encoding="utf-8")
    logger.info(f"Saved {manifest.shape_count} shapes to {directory}")
    return manifest


def load_library(directory: Path) -> ShapeLibrary:
    """Read a library written by ``save_library``, checking every bitmap against its manifest entry."""
    directory = Path(directory)
    manifest_path = directory / "manifest.json"
    try:
        manifest = LibraryManifest.model_validate(json.loads(manifest_path.read_text(encoding="utf-8")))
    except FileNotFoundError:
        raise ShapeLibraryError(f"{manifest_path}: missing shape library manifest") from None
    except (ValueError, ValidationError) as e:
        raise ShapeLibraryError(f"{manifest_path}: invalid manifest ({e})") from None
    if manifest.shape_count != len(manifest.shapes):
        raise ShapeLibraryError(f"{manifest_path}: shape_count does not match the listed shapes")
    shapes = []
    for entry in manifest.shapes:
        mask = read_bitmap(directory / entry.file)
        if mask.shape != (entry.height, entry.width) or int(mask.sum()) != entry.area:
            raise ShapeLibraryError(f"{directory / entry.file}: bitmap does not match its manifest entry")
        shapes.append(FlakeShape(mask, entry.area, entry.source_id))
    return ShapeLibrary(shapes, criteria=manifest.criteria, sources=manifest.sources)
