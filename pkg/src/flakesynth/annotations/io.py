"""Reading, writing and importing annotation documents.

A dataset directory holds its images and either a single ``annotations.json``
(one ``DatasetAnnotations`` document, the layout ``generate`` writes) or an
``annotations/`` folder with one ``ImageAnnotation`` JSON file per image. In
the per-image layout classes are taken from an optional ``classes.json`` list
of ``{"id", "name"}`` objects.
"""

import json
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

from loguru import logger
from PIL import Image, UnidentifiedImageError
from pydantic import ValidationError

from ..core.errors import DatasetImportError
from ..core.fileio import IMAGE_SUFFIXES, atomic_write_text
from .schemas import ClassInfo, DatasetAnnotations, DatasetImageEntry, DatasetManifest, ImageAnnotation

ANNOTATIONS_FILE = "annotations.json"
ANNOTATIONS_DIR = "annotations"
CLASSES_FILE = "classes.json"

PathLike = Union[str, Path]


def load_annotations(path: PathLike) -> DatasetAnnotations:
    path = Path(path)
    try:
        return DatasetAnnotations.model_validate_json(path.read_bytes())
    except FileNotFoundError:
        raise DatasetImportError("annotation file not found", file=str(path)) from None
    except ValidationError as e:
        raise DatasetImportError(f"invalid annotation document ({e.error_count()} errors: "
                                 f"{e.errors()[0]['msg']})", file=str(path)) from None


def write_annotations(path: PathLike, annotations: DatasetAnnotations) -> None:
    atomic_write_text(path, annotations.model_dump_json(indent=2))


def _image_size(path: Path) -> Tuple[int, int]:
    """(height, width) from the image header."""
    try:
        with Image.open(path) as image:
            width, height = image.size
    except FileNotFoundError:
        raise DatasetImportError("image file missing", file=str(path)) from None
    except (UnidentifiedImageError, OSError) as e:
        raise DatasetImportError(f"unreadable image ({e})", file=str(path)) from None
    return height, width


def _check_masks(image: ImageAnnotation, source: Path) -> None:
    for index, instance in enumerate(image.instances):
        try:
            mask = instance.segmentation.decode()
        except ValueError as e:
            raise DatasetImportError(f"image '{image.id}' instance {index}: undecodable mask ({e})",
                                     file=str(source)) from None
        if int(mask.sum()) != instance.area:
            raise DatasetImportError(f"image '{image.id}' instance {index}: area {instance.area} "
                                     f"does not match its mask ({int(mask.sum())} px)", file=str(source))


def _read_per_image(directory: Path) -> Tuple[DatasetAnnotations, Dict[str, Path]]:
    sources: Dict[str, Path] = {}
    images: List[ImageAnnotation] = []
    for path in sorted((directory / ANNOTATIONS_DIR).glob("*.json")):
        try:
            image = ImageAnnotation.model_validate_json(path.read_bytes())
        except ValidationError as e:
            raise DatasetImportError(f"invalid image annotation ({e.errors()[0]['msg']})", file=str(path)) from None
        images.append(image)
        sources[image.id] = path
    classes_path = directory / CLASSES_FILE
    if classes_path.is_file():
        try:
            classes = [ClassInfo.model_validate(item) for item in json.loads(classes_path.read_text(encoding="utf-8"))]
        except (ValueError, ValidationError) as e:
            raise DatasetImportError(f"invalid class list ({e})", file=str(classes_path)) from None
    else:
        ids = sorted({instance.class_id for image in images for instance in image.instances})
        classes = [ClassInfo(id=class_id, name=f"class {class_id}") for class_id in ids]
    return DatasetAnnotations(name=directory.name, classes=classes, images=images), sources


def read_dataset(directory: PathLike) -> Tuple[DatasetAnnotations, Dict[str, Path]]:
    """Annotations of a dataset directory plus the file each image's record came from."""
    directory = Path(directory)
    if not directory.is_dir():
        raise DatasetImportError("dataset directory not found", file=str(directory))
    single = directory / ANNOTATIONS_FILE
    if single.is_file():
        annotations = load_annotations(single)
        return annotations, {image.id: single for image in annotations.images}
    if (directory / ANNOTATIONS_DIR).is_dir():
        return _read_per_image(directory)
    raise DatasetImportError(f"no {ANNOTATIONS_FILE} or {ANNOTATIONS_DIR}/ folder", file=str(directory))


def import_dataset(directory: PathLike, split: Optional[str] = None) -> DatasetManifest:
    """Validate a dataset directory and summarize it."""
    directory = Path(directory)
    if not directory.is_dir() or not any(
        path.suffix.lower() in IMAGE_SUFFIXES for path in directory.rglob("*") if path.is_file()
    ):
        raise DatasetImportError("no images found", file=str(directory))
    annotations, sources = read_dataset(directory)
    if not annotations.images:
        raise DatasetImportError("no images found", file=str(directory))

    entries = []
    seen = set()
    for image in annotations.images:
        if image.id in seen:
            raise DatasetImportError(f"duplicate image id '{image.id}'", file=str(sources[image.id]))
        seen.add(image.id)
        size = _image_size(directory / image.file_name)
        if size != (image.height, image.width):
            raise DatasetImportError(
                f"image '{image.id}' is {size[0]}x{size[1]}, annotation says {image.height}x{image.width}",
                file=str(sources[image.id]),
            )
        _check_masks(image, sources[image.id])
        entries.append(DatasetImageEntry(
            path=image.file_name, height=image.height, width=image.width, instance_count=len(image.instances),
        ))
    counts = {str(class_id): count for class_id, count in sorted(annotations.class_counts().items())}
    manifest = DatasetManifest(
        name=annotations.name,
        split=split or annotations.split,
        classes=annotations.classes,
        images=entries,
        class_counts=counts,
        config=annotations.config,
    )
    logger.info(f"Imported {len(entries)} images from {directory}; instances per class: {counts}")
    return manifest
