"""Pydantic schemas for every JSON document flakesynth reads or writes."""

from typing import Any, Dict, List, Literal, Optional

import numpy as np
from pydantic import BaseModel, Field, model_validator

from .rle import rle_decode, rle_encode


class RLEMask(BaseModel):
    """Row-major run-length encoded mask."""

    size: List[int] = Field(min_length=2, max_length=2)
    counts: List[int]

    @classmethod
    def from_mask(cls, mask: np.ndarray) -> "RLEMask":
        size, counts = rle_encode(mask)
        return cls(size=list(size), counts=counts)

    def decode(self) -> np.ndarray:
        return rle_decode(self.size, self.counts)


class ClassInfo(BaseModel):
    id: int
    name: str


class InstanceAnnotation(BaseModel):
    """One ground-truth or detected instance."""

    class_id: int
    segmentation: RLEMask
    area: int = Field(ge=0)
    layer_count: Optional[int] = None
    score: Optional[float] = Field(default=None, ge=0, le=1)


class ImageAnnotation(BaseModel):
    """Instances of one image.

    ``ignore`` marks flake pixels that belong to no annotated instance (for
    example regions dropped for being too small); they are neither instance
    nor substrate.
    """

    id: str
    file_name: str
    height: int = Field(ge=1)
    width: int = Field(ge=1)
    instances: List[InstanceAnnotation] = Field(default_factory=list)
    ignore: Optional[RLEMask] = None
    metadata: Dict[str, Any] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _masks_match_image(self):
        if self.ignore is not None and list(self.ignore.size) != [self.height, self.width]:
            raise ValueError(f"ignore mask size {self.ignore.size} does not match image {self.height}x{self.width}")
        for index, instance in enumerate(self.instances):
            if list(instance.segmentation.size) != [self.height, self.width]:
                raise ValueError(
                    f"instance {index} mask size {instance.segmentation.size} "
                    f"does not match image {self.height}x{self.width}"
                )
        return self


class DatasetAnnotations(BaseModel):
    """Annotation document shared by ground truth and detections."""

    format_version: int = 1
    kind: Literal["ground_truth", "detections"] = "ground_truth"
    name: str = "dataset"
    split: Optional[Literal["train", "test"]] = None
    classes: List[ClassInfo] = Field(default_factory=list)
    images: List[ImageAnnotation] = Field(default_factory=list)
    config: Dict[str, Any] = Field(default_factory=dict)

    def image_index(self) -> Dict[str, ImageAnnotation]:
        return {image.id: image for image in self.images}

    def subset(self, image_ids) -> "DatasetAnnotations":
        """Copy restricted to ``image_ids``, keeping the document order."""
        keep = set(image_ids)
        return self.model_copy(update={"images": [image for image in self.images if image.id in keep]})

    def class_counts(self) -> Dict[int, int]:
        counts: Dict[int, int] = {info.id: 0 for info in self.classes}
        for image in self.images:
            for instance in image.instances:
                counts[instance.class_id] = counts.get(instance.class_id, 0) + 1
        return counts


class ShapeEntry(BaseModel):
    file: str
    area: int = Field(ge=1)
    height: int = Field(ge=1)
    width: int = Field(ge=1)
    source_id: str = ""


class LibraryManifest(BaseModel):
    format_version: int = 1
    shape_count: int = Field(ge=0)
    criteria: Dict[str, Any] = Field(default_factory=dict)
    sources: List[str] = Field(default_factory=list)
    shapes: List[ShapeEntry] = Field(default_factory=list)


class DatasetImageEntry(BaseModel):
    path: str
    height: int
    width: int
    instance_count: int


class DatasetManifest(BaseModel):
    """Validated view of a dataset directory."""

    name: str
    split: Optional[str] = None
    classes: List[ClassInfo]
    images: List[DatasetImageEntry]
    class_counts: Dict[str, int]
    config: Dict[str, Any] = Field(default_factory=dict)


class PRPoint(BaseModel):
    score: float
    precision: float = Field(ge=0, le=1)
    recall: float = Field(ge=0, le=1)


class ClassReport(BaseModel):
    class_id: int
    name: Optional[str] = None
    ap: float = Field(ge=0, le=1)
    num_ground_truth: int
    num_detections: int
    true_positives: int
    false_positives: int
    pr_curve: List[PRPoint] = Field(default_factory=list)


class EvaluationReport(BaseModel):
    iou_threshold: float
    iou_mode: str = "mask"
    mean_ap: float
    classes: List[ClassReport]
    excluded_classes: List[int] = Field(default_factory=list)


class BenchmarkReport(BaseModel):
    """Repeated few-shot train/detect/evaluate runs."""

    images_per_class: Optional[int]
    repeats: int
    results: Dict[str, List[float]]
    mean: Dict[str, float]
    std: Dict[str, float]
