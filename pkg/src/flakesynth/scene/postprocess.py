"""Camera-realism effects applied to rendered scenes.

Order: tape residue, shadows, vignette, Gaussian sensor noise, clamp.
"""

import numpy as np
from scipy.special import expit

from ..core.config import PostprocessSettings
from .noise import fractal_noise


def apply_residue(image: np.ndarray, rng: np.random.Generator, settings: PostprocessSettings) -> np.ndarray:
    coverage = rng.uniform(*settings.residue_coverage)
    if coverage <= 0:
        return image
    height, width = image.shape[:2]
    feature = rng.uniform(*settings.residue_feature_px)
    field = fractal_noise((height, width), feature, seed=int(rng.integers(2**31)), octaves=2,
                          offset=tuple(rng.uniform(0, 256, size=2)))
    level = np.quantile(field, 1.0 - coverage)
    residue = field > level
    opacity = rng.uniform(*settings.residue_opacity)
    tint = rng.uniform(*settings.residue_tint, size=3)
    out = image.copy()
    out[residue] = (1.0 - opacity) * out[residue] + opacity * tint
    return out


def _shadow_distance(rng: np.random.Generator, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """Signed distance, positive inside a random half-plane or ellipse."""
    height, width = rows.shape
    if rng.random() < 0.5:
        angle = rng.uniform(0, 2 * np.pi)
        anchor_row, anchor_col = rng.uniform(0, height), rng.uniform(0, width)
        return (rows - anchor_row) * np.sin(angle) + (cols - anchor_col) * np.cos(angle)
    center_row, center_col = rng.uniform(0, height), rng.uniform(0, width)
    axis_a = rng.uniform(0.1, 0.6) * max(height, width)
    axis_b = rng.uniform(0.1, 0.6) * max(height, width)
    angle = rng.uniform(0, np.pi)
    dr, dc = rows - center_row, cols - center_col
    u = dc * np.cos(angle) + dr * np.sin(angle)
    v = -dc * np.sin(angle) + dr * np.cos(angle)
    radius = np.sqrt((u / axis_a) ** 2 + (v / axis_b) ** 2)
    return (1.0 - radius) * min(axis_a, axis_b)


def apply_shadows(image: np.ndarray, rng: np.random.Generator, settings: PostprocessSettings) -> np.ndarray:
    lo, hi = settings.shadow_count
    count = int(rng.integers(lo, hi + 1))
    if count == 0:
        return image
    rows, cols = np.mgrid[0:image.shape[0], 0:image.shape[1]].astype(float)
    factor = np.ones(image.shape[:2])
    for _ in range(count):
        strength = rng.uniform(*settings.shadow_strength)
        softness = max(rng.uniform(*settings.shadow_softness_px), 1e-6)
        distance = _shadow_distance(rng, rows, cols)
        factor *= 1.0 - strength * expit(distance / softness)
    return image * factor[..., None]


def vignette_factor(height: int, width: int, strength: float) -> np.ndarray:
    """1 - v * (r / r_max)^2 around the image center; r_max reaches the corners."""
    rows, cols = np.mgrid[0:height, 0:width].astype(float)
    center_row, center_col = (height - 1) / 2.0, (width - 1) / 2.0
    r2 = (rows - center_row) ** 2 + (cols - center_col) ** 2
    r2_max = center_row ** 2 + center_col ** 2
    if r2_max == 0:
        return np.ones((height, width))
    return 1.0 - strength * r2 / r2_max


def apply_vignette(image: np.ndarray, rng: np.random.Generator, settings: PostprocessSettings) -> np.ndarray:
    strength = rng.uniform(*settings.vignette_strength)
    if strength <= 0:
        return image
    return image * vignette_factor(image.shape[0], image.shape[1], strength)[..., None]


def apply_sensor_noise(image: np.ndarray, rng: np.random.Generator, settings: PostprocessSettings) -> np.ndarray:
    sigma = rng.uniform(*settings.noise_sigma)
    if sigma <= 0:
        return image
    return image + rng.normal(0.0, sigma, size=image.shape)


def postprocess(image: np.ndarray, rng: np.random.Generator, settings: PostprocessSettings) -> np.ndarray:
    """Residue, shadows, vignette and noise on a float RGB image in [0, 1]."""
    out = np.asarray(image, dtype=float)
    out = apply_residue(out, rng, settings)
    out = apply_shadows(out, rng, settings)
    out = apply_vignette(out, rng, settings)
    out = apply_sensor_noise(out, rng, settings)
    return np.clip(out, 0.0, 1.0)
