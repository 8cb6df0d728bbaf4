"""Seeded 2D simplex noise, vectorized over coordinate arrays."""

from functools import lru_cache
from typing import Tuple, Union

import numpy as np

F2 = 0.3660254037844386  # 0.5 * (sqrt(3.0) - 1.0)
G2 = 0.21132486540518713  # (3.0 - sqrt(3.0)) / 6.0

GRAD2 = np.array(
    [[1, 1], [-1, 1], [1, -1], [-1, -1], [1, 0], [-1, 0], [1, 0], [-1, 0], [0, 1], [0, -1], [0, 1], [0, -1]],
    dtype=float,
)

ArrayLike = Union[float, np.ndarray]


@lru_cache(maxsize=64)
def _permutation(seed: int) -> np.ndarray:
    perm = np.random.Generator(np.random.PCG64(seed)).permutation(256)
    table = np.concatenate([perm, perm]).astype(np.int64)
    table.setflags(write=False)
    return table


def _corner(gi: np.ndarray, dx: np.ndarray, dy: np.ndarray) -> np.ndarray:
    t = 0.5 - dx * dx - dy * dy
    grad = GRAD2[gi % 12]
    contribution = t ** 4 * (grad[..., 0] * dx + grad[..., 1] * dy)
    return np.where(t > 0, contribution, 0.0)


def simplex_noise(x: ArrayLike, y: ArrayLike, seed: int = 0) -> Union[float, np.ndarray]:
    """Deterministic, continuous gradient noise in [-1, 1]."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    perm = _permutation(int(seed))

    skew = (x + y) * F2
    i = np.floor(x + skew).astype(np.int64)
    j = np.floor(y + skew).astype(np.int64)
    unskew = (i + j) * G2
    x0 = x - (i - unskew)
    y0 = y - (j - unskew)

    upper = x0 > y0
    i1 = upper.astype(np.int64)
    j1 = 1 - i1
    x1 = x0 - i1 + G2
    y1 = y0 - j1 + G2
    x2 = x0 - 1.0 + 2.0 * G2
    y2 = y0 - 1.0 + 2.0 * G2

    ii = i & 255
    jj = j & 255
    gi0 = perm[ii + perm[jj]]
    gi1 = perm[ii + i1 + perm[jj + j1]]
    gi2 = perm[ii + 1 + perm[jj + 1]]

    value = 70.0 * (_corner(gi0, x0, y0) + _corner(gi1, x1, y1) + _corner(gi2, x2, y2))
    value = np.clip(value, -1.0, 1.0)
    if value.ndim == 0:
        return float(value)
    return value


def fractal_noise(shape: Tuple[int, int], feature_px: float, seed: int, octaves: int = 2,
                  offset: Tuple[float, float] = (0.0, 0.0)) -> np.ndarray:
    """Sum of ``octaves`` simplex layers, each twice the frequency and half the amplitude."""
    rows, cols = np.mgrid[0:shape[0], 0:shape[1]].astype(float)
    total = np.zeros(shape, dtype=float)
    amplitude, norm = 1.0, 0.0
    frequency = 1.0 / feature_px
    for octave in range(octaves):
        total += amplitude * simplex_noise(
            cols * frequency + offset[1], rows * frequency + offset[0], seed + octave
        )
        norm += amplitude
        amplitude *= 0.5
        frequency *= 2.0
    return total / norm
