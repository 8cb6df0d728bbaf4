"""AP at a fixed mask-IoU threshold."""

from dataclasses import dataclass
from typing import Dict, List, Literal, Sequence

import numpy as np
from loguru import logger

from ..annotations.schemas import ClassReport, DatasetAnnotations, EvaluationReport, PRPoint
from ..core.config import EvaluationSettings
from ..core.errors import EvaluationError


@dataclass(frozen=True)
class MatchConfig:
    iou_threshold: float = 0.5
    iou_mode: Literal["mask", "box"] = "mask"

    def __post_init__(self):
        if not 0 < self.iou_threshold <= 1:
            raise EvaluationError(f"iou_threshold must lie in (0, 1], got {self.iou_threshold}")

    @classmethod
    def from_settings(cls, settings: EvaluationSettings) -> "MatchConfig":
        return cls(settings.iou_threshold, settings.iou_mode)


def mask_iou(a: np.ndarray, b: np.ndarray) -> float:
    """Intersection over union of two binary masks; 0 when both are empty."""
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    if a.shape != b.shape:
        raise EvaluationError(f"mask shapes differ: {a.shape} vs {b.shape}")
    union = np.count_nonzero(a | b)
    if union == 0:
        return 0.0
    return np.count_nonzero(a & b) / union


def average_precision(recall: np.ndarray, precision: np.ndarray) -> float:
    """Area under the all-point interpolated precision envelope."""
    if recall.size == 0:
        return 0.0
    mrec = np.concatenate([[0.0], recall, [1.0]])
    mpre = np.concatenate([[0.0], precision, [0.0]])
    mpre = np.maximum.accumulate(mpre[::-1])[::-1]
    steps = np.nonzero(mrec[1:] != mrec[:-1])[0]
    return float(np.sum((mrec[steps + 1] - mrec[steps]) * mpre[steps + 1]))


@dataclass(frozen=True, eq=False)
class SparseMask:
    """A binary mask kept as its bounding-box crop."""

    top: int
    left: int
    crop: np.ndarray
    area: int

    @classmethod
    def from_mask(cls, mask: np.ndarray) -> "SparseMask":
        mask = np.asarray(mask, dtype=bool)
        rows = np.nonzero(mask.any(axis=1))[0]
        if rows.size == 0:
            return cls(0, 0, np.zeros((0, 0), dtype=bool), 0)
        cols = np.nonzero(mask.any(axis=0))[0]
        crop = mask[rows[0]:rows[-1] + 1, cols[0]:cols[-1] + 1]
        return cls(int(rows[0]), int(cols[0]), crop, int(crop.sum()))

    def iou(self, other: "SparseMask") -> float:
        union_area = self.area + other.area
        if union_area == 0:
            return 0.0
        top, left = max(self.top, other.top), max(self.left, other.left)
        bottom = min(self.top + self.crop.shape[0], other.top + other.crop.shape[0])
        right = min(self.left + self.crop.shape[1], other.left + other.crop.shape[1])
        if top >= bottom or left >= right:
            return 0.0
        a = self.crop[top - self.top:bottom - self.top, left - self.left:right - self.left]
        b = other.crop[top - other.top:bottom - other.top, left - other.left:right - other.left]
        intersection = int(np.count_nonzero(a & b))
        return intersection / (union_area - intersection)


@dataclass(frozen=True, eq=False)
class ScoredMask:
    image_id: str
    score: float
    order: int
    mask: SparseMask


def match_detections(detections: Sequence[ScoredMask], ground_truth: Dict[str, List[SparseMask]],
                     threshold: float) -> np.ndarray:
    """Greedy matching in descending confidence; returns a true-positive flag per detection.

    Each detection takes the unmatched ground truth of its image with the
    highest IoU, provided that IoU reaches ``threshold``.
    """
    matched = {image_id: np.zeros(len(masks), dtype=bool) for image_id, masks in ground_truth.items()}
    hits = np.zeros(len(detections), dtype=bool)
    for position, detection in enumerate(detections):
        candidates = ground_truth.get(detection.image_id, [])
        best, best_iou = -1, threshold
        for index, mask in enumerate(candidates):
            if matched[detection.image_id][index]:
                continue
            iou = detection.mask.iou(mask)
            if iou >= best_iou and (best < 0 or iou > best_iou):
                best, best_iou = index, iou
        if best >= 0:
            matched[detection.image_id][best] = True
            hits[position] = True
    return hits


def _class_report(class_id: int, name: str, detections: List[ScoredMask],
                  ground_truth: Dict[str, List[SparseMask]], threshold: float) -> ClassReport:
    detections = sorted(detections, key=lambda d: (-d.score, d.order))
    num_gt = sum(len(masks) for masks in ground_truth.values())
    hits = match_detections(detections, ground_truth, threshold)
    tp = np.cumsum(hits)
    fp = np.cumsum(~hits)
    recall = tp / num_gt if num_gt else np.zeros_like(tp, dtype=float)
    precision = tp / np.maximum(tp + fp, 1)
    return ClassReport(
        class_id=class_id,
        name=name,
        ap=average_precision(recall, precision) if num_gt else 0.0,
        num_ground_truth=num_gt,
        num_detections=len(detections),
        true_positives=int(hits.sum()),
        false_positives=int((~hits).sum()),
        pr_curve=[
            PRPoint(score=d.score, precision=float(p), recall=float(r))
            for d, p, r in zip(detections, precision, recall)
        ],
    )


def _gather(annotations: DatasetAnnotations, with_scores: bool) -> Dict[int, list]:
    per_class: Dict[int, list] = {}
    order = 0
    for image in annotations.images:
        for instance in image.instances:
            mask = SparseMask.from_mask(instance.segmentation.decode())
            if with_scores:
                score = 1.0 if instance.score is None else float(instance.score)
                per_class.setdefault(instance.class_id, []).append(ScoredMask(image.id, score, order, mask))
            else:
                per_class.setdefault(instance.class_id, []).append((image.id, mask))
            order += 1
    return per_class


def ap50(detections: DatasetAnnotations, ground_truth: DatasetAnnotations,
         config: MatchConfig = MatchConfig()) -> EvaluationReport:
    """Per-class AP and mean AP over the classes present in the ground truth.

    Detections without a score count as confidence 1. Classes that only
    appear in detections are listed as excluded and do not enter the mean.
    """
    if config.iou_mode == "box":
        raise EvaluationError("box IoU not implemented")
    known = ground_truth.image_index()
    for image in detections.images:
        if image.id not in known:
            raise EvaluationError(f"detections reference unknown image id '{image.id}'")
        reference = known[image.id]
        if (image.height, image.width) != (reference.height, reference.width):
            raise EvaluationError(f"image '{image.id}' size differs between detections and ground truth")

    truth = _gather(ground_truth, with_scores=False)
    found = _gather(detections, with_scores=True)
    names = {info.id: info.name for info in ground_truth.classes}
    names.update({info.id: info.name for info in detections.classes if info.id not in names})

    reports = []
    for class_id in sorted(truth):
        masks_by_image: Dict[str, List[SparseMask]] = {}
        for image_id, mask in truth[class_id]:
            masks_by_image.setdefault(image_id, []).append(mask)
        reports.append(_class_report(class_id, names.get(class_id), found.get(class_id, []), masks_by_image,
                                     config.iou_threshold))
    excluded = sorted(class_id for class_id in found if class_id not in truth)
    if not reports:
        raise EvaluationError("ground truth contains no instances")
    mean_ap = float(np.mean([report.ap for report in reports]))
    logger.info(f"AP{int(round(config.iou_threshold * 100))}: mean {mean_ap:.4f} over {len(reports)} classes")
    return EvaluationReport(
        iou_threshold=config.iou_threshold,
        iou_mode=config.iou_mode,
        mean_ap=mean_ap,
        classes=reports,
        excluded_classes=excluded,
    )
