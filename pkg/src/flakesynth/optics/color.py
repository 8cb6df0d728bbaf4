"""Spectral integration of reflectance into RGB colors."""

import threading
from dataclasses import dataclass
from typing import Dict, Optional, Sequence

import numpy as np
from loguru import logger

from ..core.config import MaterialSettings, PipelineConfig
from ..core.errors import OpticsError
from .dispersion import CameraResponse, DispersionTable, SpectralCurve, load_camera, load_dispersion, load_spectral_curve
from .tmm import LayerStack, reflectance_spectrum


@dataclass(frozen=True)
class RGBColor:
    r: float
    g: float
    b: float

    def as_array(self) -> np.ndarray:
        return np.array([self.r, self.g, self.b], dtype=float)

    def clamped(self) -> "RGBColor":
        return RGBColor(*np.clip(self.as_array(), 0.0, 1.0))


def wavelength_grid(start: float = 380.0, stop: float = 780.0, step: float = 5.0) -> np.ndarray:
    count = int(round((stop - start) / step)) + 1
    return start + step * np.arange(count, dtype=float)


def _bin_widths(grid: np.ndarray) -> np.ndarray:
    if grid.size == 1:
        return np.ones(1)
    steps = np.diff(grid)
    return np.append(steps, steps[-1])


def channel_integrals(values: np.ndarray, source: SpectralCurve, camera: CameraResponse,
                      grid: np.ndarray) -> np.ndarray:
    """Riemann sums of values * source * camera_c over the grid, one per channel."""
    weights = source.at(grid) * _bin_widths(grid)
    return camera.at(grid) @ (values * weights)


def render_color(stack_for_pixel: LayerStack, source: SpectralCurve, camera: CameraResponse,
                 grid: Sequence[float], white: Optional[SpectralCurve] = None,
                 clamp: bool = True) -> RGBColor:
    """RGB color of a stack, normalized per channel so a perfect mirror under ``white`` is (1, 1, 1).

    ``white`` defaults to an equal-energy illuminant of unit power, which keeps
    the result linear in ``source``.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise OpticsError("empty wavelength grid")
    white = white or SpectralCurve.flat(span=(float(grid.min()), float(grid.max())))
    reference = channel_integrals(np.ones_like(grid), white, camera, grid)
    if np.any(reference <= 0):
        raise OpticsError("zero white reference in at least one camera channel")
    rgb = channel_integrals(reflectance_spectrum(stack_for_pixel, grid), source, camera, grid) / reference
    color = RGBColor(*rgb)
    return color.clamped() if clamp else color


def layer_thickness(layer_count: int, material: MaterialSettings) -> float:
    """Physical thickness in nm of ``layer_count`` stacked layers."""
    if layer_count < 0:
        raise OpticsError(f"layer count must be >= 0, got {layer_count}")
    return layer_count * material.layer_thickness_nm


@dataclass(frozen=True, eq=False)
class OpticalSetup:
    """Everything besides the flake and oxide thickness that sets a pixel's color."""

    substrate: DispersionTable
    oxide: DispersionTable
    source: SpectralCurve
    camera: CameraResponse
    grid: np.ndarray
    white: Optional[SpectralCurve] = None
    ambient_n: float = 1.0

    @classmethod
    def from_config(cls, config: PipelineConfig) -> "OpticalSetup":
        optics = config.optics
        return cls(
            substrate=load_dispersion(config.resolve(optics.substrate, "materials")),
            oxide=load_dispersion(config.resolve(optics.oxide, "materials")),
            source=load_spectral_curve(config.resolve(optics.light_source, "spectra")),
            camera=load_camera([config.resolve(name, "spectra") for name in optics.camera]),
            grid=wavelength_grid(optics.grid_start_nm, optics.grid_stop_nm, optics.grid_step_nm),
            white=load_spectral_curve(config.resolve(optics.white_reference, "spectra")),
            ambient_n=optics.ambient_n,
        )

    def stack(self, material: DispersionTable, material_thickness: float, oxide_thickness: float) -> LayerStack:
        """Flake over SiO2 over Si."""
        return LayerStack.build(
            self.substrate,
            [(material, material_thickness), (self.oxide, oxide_thickness)],
            ambient_n=self.ambient_n,
        )

    def color(self, stack: LayerStack) -> RGBColor:
        return render_color(stack, self.source, self.camera, self.grid, white=self.white)


class ColorLookupTable:
    """Colors of one material on one oxide thickness, computed once per layer count."""

    def __init__(self, setup: OpticalSetup, material: DispersionTable, material_settings: MaterialSettings,
                 oxide_thickness: float):
        self.setup = setup
        self.material = material
        self.material_settings = material_settings
        self.oxide_thickness = float(oxide_thickness)
        self.evaluations = 0
        self._colors: Dict[int, np.ndarray] = {}
        self._lock = threading.Lock()

    def stack_for(self, layer_count: int) -> LayerStack:
        thickness = layer_thickness(layer_count, self.material_settings)
        return self.setup.stack(self.material, thickness, self.oxide_thickness)

    def color(self, layer_count: int) -> np.ndarray:
        layer_count = int(layer_count)
        with self._lock:
            cached = self._colors.get(layer_count)
            if cached is None:
                cached = self.setup.color(self.stack_for(layer_count)).as_array()
                self._colors[layer_count] = cached
                self.evaluations += 1
                logger.debug(
                    f"LUT {self.material.material_name}@{self.oxide_thickness:.2f} nm: "
                    f"count {layer_count} -> {np.round(cached, 4).tolist()}"
                )
        return cached

    def colors(self, layer_counts: Sequence[int]) -> np.ndarray:
        """(len(layer_counts), 3) array of colors."""
        return np.stack([self.color(count) for count in layer_counts]) if len(layer_counts) else np.zeros((0, 3))
