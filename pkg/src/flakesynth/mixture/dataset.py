"""Labeled contrast samples collected from annotated images."""

from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
from loguru import logger
from scipy import ndimage
from tqdm import tqdm

from ..annotations.schemas import ClassInfo, DatasetAnnotations
from ..contrast.background import estimate_background
from ..contrast.projection import extract_instance_contrasts, to_contrast
from ..core.errors import PreprocessError
from ..core.fileio import read_rgb

BACKGROUND_CLASS = ClassInfo(id=0, name="background")


@dataclass(frozen=True, eq=False)
class LabeledContrastSet:
    """Contrast points with class indices into ``class_ids``/``class_names``."""

    points: np.ndarray
    labels: np.ndarray
    class_ids: List[int]
    class_names: List[str]

    def __post_init__(self):
        points = np.asarray(self.points, dtype=float)
        labels = np.asarray(self.labels, dtype=np.int64)
        if points.ndim != 2 or labels.shape != (points.shape[0],):
            raise PreprocessError(f"points {points.shape} and labels {labels.shape} do not line up")
        if not self.class_ids or len(self.class_ids) != len(self.class_names):
            raise PreprocessError("class ids and names must be non-empty and of equal length")
        if labels.size and (labels.min() < 0 or labels.max() >= len(self.class_ids)):
            raise PreprocessError("label index outside the class list")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return int(self.labels.size)

    @property
    def num_classes(self) -> int:
        return len(self.class_ids)

    @property
    def dim(self) -> int:
        return int(self.points.shape[1])

    def counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.num_classes)

    def subset(self, keep: np.ndarray) -> "LabeledContrastSet":
        return LabeledContrastSet(self.points[keep], self.labels[keep], list(self.class_ids), list(self.class_names))

    def with_points(self, points: np.ndarray) -> "LabeledContrastSet":
        return LabeledContrastSet(points, self.labels, list(self.class_ids), list(self.class_names))

    def class_infos(self) -> List[ClassInfo]:
        return [ClassInfo(id=i, name=n) for i, n in zip(self.class_ids, self.class_names)]


def _training_classes(annotations: DatasetAnnotations, classes: Optional[Sequence[int]]) -> List[ClassInfo]:
    counts = annotations.class_counts()
    names = {info.id: info.name for info in annotations.classes}
    if classes is None:
        classes = sorted(class_id for class_id, count in counts.items() if count > 0)
    return [ClassInfo(id=class_id, name=names.get(class_id, str(class_id))) for class_id in classes]


def collect_contrasts(annotations: DatasetAnnotations, root: Path, classes: Optional[Sequence[int]] = None,
                      erode: bool = True, image_ids: Optional[Sequence[str]] = None,
                      background_points: int = 0, max_points_per_class: Optional[int] = None,
                      rng: Optional[np.random.Generator] = None) -> LabeledContrastSet:
    """Contrast values of every annotated instance, labeled by class.

    ``root`` is the directory the annotations' ``file_name`` entries are
    relative to. With ``background_points > 0`` up to that many pixels
    outside every instance and outside the image's ignore mask are sampled
    per image as class 0.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    infos = _training_classes(annotations, classes)
    if background_points > 0:
        infos = [BACKGROUND_CLASS] + [info for info in infos if info.id != BACKGROUND_CLASS.id]
    if not infos:
        raise PreprocessError("no annotated classes to collect contrasts for")
    index_of = {info.id: index for index, info in enumerate(infos)}
    selected = set(image_ids) if image_ids is not None else None

    points: Dict[int, List[np.ndarray]] = {index: [] for index in range(len(infos))}
    images = [image for image in annotations.images if selected is None or image.id in selected]
    for image in tqdm(images, desc="contrasts", disable=None):
        rgb = read_rgb(Path(root) / image.file_name)
        contrast = to_contrast(rgb, estimate_background(rgb))
        covered = np.zeros(rgb.shape[:2], dtype=bool)
        for instance in image.instances:
            mask = instance.segmentation.decode()
            covered |= mask
            index = index_of.get(instance.class_id)
            if index is None or not mask.any():
                continue
            points[index].append(extract_instance_contrasts(contrast, mask, erode=erode))
        if image.ignore is not None:
            covered |= image.ignore.decode()
        if background_points > 0:
            free = ~covered
            if erode and covered.any():
                free &= ~ndimage.binary_dilation(covered, structure=np.ones((3, 3), dtype=bool))
            candidates = contrast.data[free]
            if candidates.shape[0] > background_points:
                candidates = candidates[np.sort(rng.choice(candidates.shape[0], background_points, replace=False))]
            points[index_of[BACKGROUND_CLASS.id]].append(candidates)

    all_points, all_labels = [], []
    for index, chunks in points.items():
        merged = np.concatenate(chunks) if chunks else np.zeros((0, 3))
        if max_points_per_class is not None and merged.shape[0] > max_points_per_class:
            merged = merged[np.sort(rng.choice(merged.shape[0], max_points_per_class, replace=False))]
        logger.debug(f"class {infos[index].name}: {merged.shape[0]} contrast points")
        all_points.append(merged)
        all_labels.append(np.full(merged.shape[0], index, dtype=np.int64))
    data = LabeledContrastSet(
        np.concatenate(all_points),
        np.concatenate(all_labels),
        [info.id for info in infos],
        [info.name for info in infos],
    )
    logger.info(f"Collected {len(data)} contrast points from {len(images)} images over {data.num_classes} classes")
    return data


def select_few_shot_subset(annotations: DatasetAnnotations, images_per_class: int,
                           rng: np.random.Generator) -> List[str]:
    """Image ids such that every class shows up in at least ``images_per_class`` of them.

    Images are visited in a seeded random order and kept when they contain a
    class that still needs images. Classes with fewer images than requested
    keep all of theirs.
    """
    if images_per_class < 1:
        raise PreprocessError(f"images_per_class must be >= 1, got {images_per_class}")
    needed = {class_id: images_per_class for class_id, count in annotations.class_counts().items() if count > 0}
    chosen = set()
    for position in rng.permutation(len(annotations.images)):
        if not any(needed.values()):
            break
        image = annotations.images[int(position)]
        present = {instance.class_id for instance in image.instances}
        if any(needed.get(class_id, 0) > 0 for class_id in present):
            chosen.add(image.id)
            for class_id in present:
                if needed.get(class_id, 0) > 0:
                    needed[class_id] -= 1
    short = sorted(class_id for class_id, remaining in needed.items() if remaining > 0)
    if short:
        logger.warning(f"Classes {short} appear in fewer than {images_per_class} images; using all of them")
    return [image.id for image in annotations.images if image.id in chosen]
