"""Row-major run-length encoding of binary masks.

Counts alternate between runs of 0 and runs of 1 and always start with a
0-run, which has length 0 when the first pixel is set.
"""

from typing import List, Sequence, Tuple

import numpy as np


def rle_encode(mask: np.ndarray) -> Tuple[Tuple[int, int], List[int]]:
    """Return ``((height, width), counts)`` for a 2D boolean mask."""
    mask = np.asarray(mask, dtype=bool)
    if mask.ndim != 2:
        raise ValueError("mask must be two-dimensional")
    flat = mask.reshape(-1).astype(np.int8)
    changes = np.nonzero(np.diff(flat))[0] + 1
    boundaries = np.concatenate([[0], changes, [flat.size]])
    counts = np.diff(boundaries).tolist()
    if flat.size and flat[0] == 1:
        counts.insert(0, 0)
    return (int(mask.shape[0]), int(mask.shape[1])), [int(c) for c in counts]


def rle_decode(size: Sequence[int], counts: Sequence[int]) -> np.ndarray:
    """Inverse of :func:`rle_encode`; raises ``ValueError`` on inconsistent input."""
    height, width = int(size[0]), int(size[1])
    counts = np.asarray(counts, dtype=np.int64)
    if height < 0 or width < 0:
        raise ValueError("negative mask size")
    if np.any(counts < 0):
        raise ValueError("negative run length")
    if int(counts.sum()) != height * width:
        raise ValueError(f"run lengths sum to {int(counts.sum())}, expected {height * width}")
    values = np.arange(counts.size) % 2 == 1
    return np.repeat(values, counts).reshape(height, width)
