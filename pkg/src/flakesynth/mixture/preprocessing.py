"""Cleanup of labeled contrast distributions before classifier fitting.

The chain runs denoise, outlier filter, standardization and class balancing,
in that order.
"""

from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np
from loguru import logger
from sklearn.cluster import DBSCAN
from sklearn.neighbors import NearestNeighbors

from ..core.config import PreprocessSettings
from ..core.errors import PreprocessError
from .dataset import LabeledContrastSet


def knn_denoise(data: LabeledContrastSet, k: int) -> LabeledContrastSet:
    """Drop points whose k nearest neighbors vote for a different class.

    A point stays when its own class receives at least as many votes as any
    other class, so ties keep the point.
    """
    if k < 1:
        raise PreprocessError(f"k must be >= 1, got {k}")
    n = len(data)
    if n < k + 1:
        raise PreprocessError(f"k-NN denoising with k={k} needs at least {k + 1} points, got {n}")
    _, neighbors = NearestNeighbors(n_neighbors=k + 1).fit(data.points).kneighbors(data.points)
    is_self = neighbors == np.arange(n)[:, None]
    is_self[~is_self.any(axis=1), -1] = True
    neighbors = neighbors[~is_self].reshape(n, k)
    votes = np.zeros((n, data.num_classes), dtype=np.int64)
    np.add.at(votes, (np.repeat(np.arange(n), k), data.labels[neighbors].ravel()), 1)
    keep = votes[np.arange(n), data.labels] == votes.max(axis=1)
    removed = n - int(keep.sum())
    if removed:
        logger.debug(f"k-NN denoising removed {removed} of {n} points")
    return data.subset(keep)


def dbscan_filter(data: LabeledContrastSet, eps: float, min_pts: int) -> LabeledContrastSet:
    """Per-class density clustering; points labeled as noise are removed."""
    if eps <= 0 or min_pts < 1:
        raise PreprocessError(f"invalid DBSCAN parameters eps={eps}, min_pts={min_pts}")
    keep = np.zeros(len(data), dtype=bool)
    for index, name in enumerate(data.class_names):
        members = np.nonzero(data.labels == index)[0]
        if members.size == 0:
            raise PreprocessError("no points before outlier filtering", class_name=name)
        clusters = DBSCAN(eps=eps, min_samples=min_pts).fit_predict(data.points[members])
        survivors = members[clusters != -1]
        if survivors.size == 0:
            raise PreprocessError("every point was classified as an outlier", class_name=name)
        keep[survivors] = True
        logger.debug(f"DBSCAN kept {survivors.size} of {members.size} points of class {name}")
    return data.subset(keep)


@dataclass(frozen=True, eq=False)
class Standardizer:
    """Per-dimension affine map to zero mean and unit (population) std."""

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        if np.any(~np.isfinite(self.std)) or np.any(self.std <= 0):
            raise PreprocessError(f"standardizer needs a positive std in every dimension, got {self.std}")

    @classmethod
    def fit(cls, points: np.ndarray) -> "Standardizer":
        points = np.asarray(points, dtype=float)
        if points.shape[0] < 2:
            raise PreprocessError("standardization needs at least 2 points")
        std = points.std(axis=0)
        if np.any(std == 0):
            raise PreprocessError(f"zero variance in dimension(s) {np.nonzero(std == 0)[0].tolist()}")
        return cls(points.mean(axis=0), std)

    @classmethod
    def identity(cls, dim: int) -> "Standardizer":
        return cls(np.zeros(dim), np.ones(dim))

    def apply(self, points: np.ndarray) -> np.ndarray:
        return (np.asarray(points, dtype=float) - self.mean) / self.std

    def to_dict(self) -> Dict[str, List[float]]:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, data: Dict[str, List[float]]) -> "Standardizer":
        return cls(np.asarray(data["mean"], dtype=float), np.asarray(data["std"], dtype=float))


def standardize_fit_apply(data: LabeledContrastSet) -> Tuple[LabeledContrastSet, Standardizer]:
    standardizer = Standardizer.fit(data.points)
    return data.with_points(standardizer.apply(data.points)), standardizer


def balance_classes(data: LabeledContrastSet, rng: np.random.Generator) -> LabeledContrastSet:
    """Upsample every class with replacement to the size of the largest one."""
    counts = data.counts()
    for index, count in enumerate(counts):
        if count == 0:
            raise PreprocessError("cannot balance an empty class", class_name=data.class_names[index])
    target = int(counts.max())
    if np.all(counts == target):
        return data
    order = []
    for index, count in enumerate(counts):
        members = np.nonzero(data.labels == index)[0]
        extra = rng.choice(members, size=target - int(count), replace=True) if count < target else members[:0]
        order.append(members)
        order.append(extra)
    logger.debug(f"Balanced classes {counts.tolist()} to {target} points each")
    return data.subset(np.concatenate(order))


def preprocess(data: LabeledContrastSet, settings: PreprocessSettings,
               rng: np.random.Generator) -> Tuple[LabeledContrastSet, Standardizer]:
    """k-NN denoise, DBSCAN filter, standardize, balance."""
    before = data.counts().tolist()
    data = knn_denoise(data, settings.knn_k)
    data = dbscan_filter(data, settings.dbscan_eps, settings.dbscan_min_pts)
    data, standardizer = standardize_fit_apply(data)
    data = balance_classes(data, rng)
    logger.info(f"Preprocessed contrast points per class: {before} -> {data.counts().tolist()}")
    return data, standardizer
