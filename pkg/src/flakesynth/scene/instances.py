"""Ground-truth instances from a layer map."""

from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from ..annotations.schemas import ClassInfo
from ..shapes.labeling import connected_components
from .layout import LayerMap


@dataclass(frozen=True, eq=False)
class SceneInstance:
    """One constant-thickness connected region, stored as a crop plus its offset."""

    crop: np.ndarray
    top: int
    left: int
    image_shape: Tuple[int, int]
    layer_count: int
    class_label: int

    @property
    def area(self) -> int:
        return int(self.crop.sum())

    @property
    def mask(self) -> np.ndarray:
        full = np.zeros(self.image_shape, dtype=bool)
        h, w = self.crop.shape
        full[self.top:self.top + h, self.left:self.left + w] = self.crop
        return full


def class_label_for(layer_count: int, annotated_classes: int) -> int:
    """Layer count itself up to ``annotated_classes``, otherwise the catch-all thick class."""
    return layer_count if layer_count <= annotated_classes else annotated_classes + 1


def class_infos(annotated_classes: int) -> List[ClassInfo]:
    infos = [ClassInfo(id=count, name=f"{count} layer" + ("s" if count > 1 else ""))
             for count in range(1, annotated_classes + 1)]
    infos.append(ClassInfo(id=annotated_classes + 1, name="thick"))
    return infos


def derive_instances(layer_map: LayerMap, annotated_classes: int, merge_thick: bool = False) -> List[SceneInstance]:
    """8-connected components of every constant layer-count level set with count >= 1.

    With ``merge_thick`` the counts above ``annotated_classes`` form a single
    level set, so each connected catch-all region is one instance; its
    ``layer_count`` is the smallest count inside it.
    """
    counts = layer_map.counts
    levels = [int(level) for level in np.unique(counts) if level >= 1]
    regions = [(level, counts == level) for level in levels if not merge_thick or level <= annotated_classes]
    if merge_thick and levels and levels[-1] > annotated_classes:
        regions.append((annotated_classes + 1, counts > annotated_classes))
    instances = []
    for level, level_set in regions:
        labeling = connected_components(level_set, connectivity=8)
        for component in labeling.components:
            top, left, _, _ = component.bbox
            crop = labeling.crop(component)
            h, w = crop.shape
            layer_count = level
            if level > annotated_classes:
                layer_count = int(counts[top:top + h, left:left + w][crop].min())
            instances.append(SceneInstance(
                crop=crop,
                top=top,
                left=left,
                image_shape=counts.shape,
                layer_count=layer_count,
                class_label=class_label_for(layer_count, annotated_classes),
            ))
    return instances
