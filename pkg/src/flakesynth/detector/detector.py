"""Classical flake detection: contrast projection, per-pixel classification,
morphological cleanup and per-class connected components."""

import multiprocessing
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
from loguru import logger
from scipy import ndimage
from tqdm import tqdm

from ..annotations.schemas import ClassInfo, DatasetAnnotations, ImageAnnotation, InstanceAnnotation, RLEMask
from ..contrast.background import estimate_background
from ..contrast.projection import to_contrast
from ..core.config import DetectorSettings
from ..core.fileio import list_images, read_rgb
from ..mixture.base import Classifier
from ..mixture.dataset import BACKGROUND_CLASS
from ..shapes.labeling import connected_components

NO_CLASS = -1


@dataclass(frozen=True)
class DetectorParams:
    min_area: int = 200
    opening_radius: int = 1
    rejection: bool = True

    def __post_init__(self):
        if self.min_area < 1:
            raise ValueError(f"min_area must be >= 1, got {self.min_area}")
        if self.opening_radius < 0:
            raise ValueError(f"opening_radius must be >= 0, got {self.opening_radius}")

    @classmethod
    def from_settings(cls, settings: DetectorSettings) -> "DetectorParams":
        return cls(settings.min_area, settings.opening_radius, settings.rejection)


@dataclass(frozen=True, eq=False)
class DetectedInstance:
    mask: np.ndarray
    class_id: int
    confidence: float
    area: int

    def annotation(self) -> InstanceAnnotation:
        return InstanceAnnotation(
            class_id=self.class_id,
            segmentation=RLEMask.from_mask(self.mask),
            area=self.area,
            score=self.confidence,
        )


def disk(radius: int) -> np.ndarray:
    rows, cols = np.mgrid[-radius:radius + 1, -radius:radius + 1]
    return rows ** 2 + cols ** 2 <= radius ** 2


def classify_pixels(image: np.ndarray, classifier: Classifier, rejection: bool = True):
    """Per-pixel class id map (``NO_CLASS`` for background) and max posterior."""
    contrast = to_contrast(image, estimate_background(image))
    posteriors, rejected = classifier.classify(contrast.points())
    best = posteriors.argmax(axis=1)
    class_ids = np.asarray(classifier.class_ids)[best]
    class_ids[class_ids == BACKGROUND_CLASS.id] = NO_CLASS
    if rejection:
        class_ids[rejected] = NO_CLASS
    shape = image.shape[:2]
    return class_ids.reshape(shape), posteriors.max(axis=1).reshape(shape)


def detect(image: np.ndarray, classifier: Classifier, params: DetectorParams) -> List[DetectedInstance]:
    """Detected instances grouped by ascending class id."""
    class_map, confidence = classify_pixels(image, classifier, params.rejection)
    structure = disk(params.opening_radius) if params.opening_radius > 0 else None
    instances: List[DetectedInstance] = []
    dropped = 0
    for class_id in np.unique(class_map):
        if class_id == NO_CLASS:
            continue
        binary = class_map == class_id
        if structure is not None:
            binary = ndimage.binary_opening(binary, structure=structure)
        labeling = connected_components(binary, connectivity=8)
        for component in labeling.components:
            if component.area < params.min_area:
                dropped += 1
                continue
            mask = labeling.mask(component.label)
            instances.append(DetectedInstance(
                mask=mask,
                class_id=int(class_id),
                confidence=float(np.clip(confidence[mask].mean(), 0.0, 1.0)),
                area=int(component.area),
            ))
    if dropped:
        logger.debug(f"Discarded {dropped} components below {params.min_area} px")
    return instances


class FlakeDetector:
    """Runs ``detect`` over image directories and builds detection documents."""

    def __init__(self, classifier: Classifier, params: DetectorParams):
        self.classifier = classifier
        self.params = params

    def detect_file(self, path: Path, image_id: Optional[str] = None,
                    file_name: Optional[str] = None) -> ImageAnnotation:
        image = read_rgb(path)
        instances = detect(image, self.classifier, self.params)
        return ImageAnnotation(
            id=image_id or Path(path).stem,
            file_name=file_name or Path(path).name,
            height=image.shape[0],
            width=image.shape[1],
            instances=[instance.annotation() for instance in instances],
        )

    def class_infos(self) -> List[ClassInfo]:
        return [
            ClassInfo(id=class_id, name=name)
            for class_id, name in zip(self.classifier.class_ids, self.classifier.class_names)
            if class_id != BACKGROUND_CLASS.id
        ]


_detector: Optional[FlakeDetector] = None


def _init_worker(classifier: Classifier, params: DetectorParams) -> None:
    global _detector
    _detector = FlakeDetector(classifier, params)


def _detect_task(task: Tuple[Path, Optional[str], Optional[str]]) -> ImageAnnotation:
    return _detector.detect_file(*task)


def detect_directory(classifier: Classifier, images_dir: Path, params: DetectorParams, jobs: int = 1,
                     reference: Optional[DatasetAnnotations] = None) -> DatasetAnnotations:
    """Detections for every image in ``images_dir``.

    Without ``reference`` images are keyed by file stem. With a ground-truth
    document, ``images_dir`` is its root and its image ids and file names are
    reused so detections line up with it.
    """
    if reference is None:
        tasks = [(path, None, None) for path in list_images(images_dir)]
    else:
        tasks = [(Path(images_dir) / image.file_name, image.id, image.file_name) for image in reference.images]
    detector = FlakeDetector(classifier, params)
    if jobs > 1 and len(tasks) > 1:
        context = multiprocessing.get_context("spawn")
        with ProcessPoolExecutor(max_workers=jobs, mp_context=context, initializer=_init_worker,
                                 initargs=(classifier, params)) as pool:
            images = list(tqdm(pool.map(_detect_task, tasks), total=len(tasks), desc="detecting", disable=None))
    else:
        images = [detector.detect_file(*task) for task in tqdm(tasks, desc="detecting", disable=None)]
    found = sum(len(image.instances) for image in images)
    logger.info(f"Detected {found} instances in {len(images)} images")
    return DatasetAnnotations(
        kind="detections",
        name=Path(images_dir).name,
        classes=detector.class_infos(),
        images=images,
        config={"detector": asdict(params), "classifier": classifier.kind},
    )
