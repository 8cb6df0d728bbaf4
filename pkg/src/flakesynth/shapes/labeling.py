"""Connected-component labeling: two passes over row runs joined with union-find.

The first pass splits every row into runs of set pixels and unions runs of
adjacent rows that touch (column overlap for 4-connectivity, overlap or
diagonal contact for 8-connectivity). The second pass resolves run roots to
dense labels in raster order and paints them back.
"""

from dataclasses import dataclass
from typing import List, Tuple

import numpy as np


class UnionFind:
    """Disjoint sets over ``0..n-1`` with path compression; the smaller root wins."""

    def __init__(self, n: int):
        self.parents = np.arange(n, dtype=np.int64)

    def find(self, i: int) -> int:
        parents = self.parents
        root = i
        while parents[root] != root:
            root = parents[root]
        while parents[i] != root:
            parents[i], i = root, parents[i]
        return int(root)

    def union(self, i: int, j: int) -> None:
        root_i = self.find(i)
        root_j = self.find(j)
        if root_i < root_j:
            self.parents[root_j] = root_i
        elif root_j < root_i:
            self.parents[root_i] = root_j


@dataclass(frozen=True)
class Component:
    label: int
    area: int
    bbox: Tuple[int, int, int, int]  # top, left, bottom (exclusive), right (exclusive)


@dataclass(frozen=True, eq=False)
class Labeling:
    labels: np.ndarray
    components: List[Component]

    @property
    def count(self) -> int:
        return len(self.components)

    def mask(self, label: int) -> np.ndarray:
        return self.labels == label

    def crop(self, component: Component) -> np.ndarray:
        top, left, bottom, right = component.bbox
        return self.labels[top:bottom, left:right] == component.label


def find_runs(mask: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Row, start column and end column (exclusive) of every horizontal run, raster order."""
    padded = np.pad(mask.astype(np.int8), ((0, 0), (1, 1)))
    steps = np.diff(padded, axis=1)
    rows, starts = np.nonzero(steps == 1)
    _, ends = np.nonzero(steps == -1)
    return rows, starts, ends


def connected_components(mask: np.ndarray, connectivity: int = 8) -> Labeling:
    """Label the set pixels of a binary mask; background is 0, labels dense from 1."""
    if connectivity not in (4, 8):
        raise ValueError(f"connectivity must be 4 or 8, got {connectivity}")
    mask = np.asarray(mask, dtype=bool)
    if mask.ndim != 2:
        raise ValueError("mask must be two-dimensional")
    height, width = mask.shape
    labels = np.zeros((height, width), dtype=np.int32)
    rows, starts, ends = find_runs(mask)
    if rows.size == 0:
        return Labeling(labels, [])

    reach = 1 if connectivity == 8 else 0
    sets = UnionFind(rows.size)
    row_bounds = np.searchsorted(rows, np.arange(height + 1))
    for row in range(1, height):
        cur_lo, cur_hi = row_bounds[row], row_bounds[row + 1]
        prev_lo, prev_hi = row_bounds[row - 1], row_bounds[row]
        if cur_lo == cur_hi or prev_lo == prev_hi:
            continue
        prev_starts = starts[prev_lo:prev_hi]
        prev_ends = ends[prev_lo:prev_hi]
        first = np.searchsorted(prev_ends, starts[cur_lo:cur_hi] - reach, side="right")
        last = np.searchsorted(prev_starts, ends[cur_lo:cur_hi] + reach, side="left")
        for offset in np.nonzero(last > first)[0]:
            run = cur_lo + offset
            for other in range(prev_lo + first[offset], prev_lo + last[offset]):
                sets.union(int(run), int(other))

    roots = np.array([sets.find(i) for i in range(rows.size)], dtype=np.int64)
    # roots are the smallest run index of each set, so unique order is raster order
    unique_roots, run_labels = np.unique(roots, return_inverse=True)
    run_labels = run_labels.astype(np.int32) + 1

    lengths = ends - starts
    flat_starts = rows * width + starts
    offsets = np.arange(lengths.sum()) - np.repeat(np.cumsum(lengths) - lengths, lengths)
    labels.reshape(-1)[np.repeat(flat_starts, lengths) + offsets] = np.repeat(run_labels, lengths)

    count = unique_roots.size
    areas = np.bincount(run_labels, weights=lengths, minlength=count + 1)[1:].astype(int)
    top = np.full(count + 1, height)
    bottom = np.zeros(count + 1, dtype=int)
    left = np.full(count + 1, width)
    right = np.zeros(count + 1, dtype=int)
    np.minimum.at(top, run_labels, rows)
    np.maximum.at(bottom, run_labels, rows + 1)
    np.minimum.at(left, run_labels, starts)
    np.maximum.at(right, run_labels, ends)
    components = [
        Component(label, int(areas[label - 1]), (int(top[label]), int(left[label]), int(bottom[label]), int(right[label])))
        for label in range(1, count + 1)
    ]
    return Labeling(labels, components)
