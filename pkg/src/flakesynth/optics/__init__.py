"""Thin-film optics: dispersion data, transfer-matrix reflectance and RGB rendering."""

from .color import (
    ColorLookupTable,
    OpticalSetup,
    RGBColor,
    layer_thickness,
    render_color,
    wavelength_grid,
)
from .dispersion import (
    CameraResponse,
    DispersionTable,
    SpectralCurve,
    interpolate_nk,
    load_camera,
    load_dispersion,
    load_spectral_curve,
)
from .tmm import Film, LayerStack, amplitude_reflection, reflectance, reflectance_spectrum

__all__ = [
    "ColorLookupTable",
    "OpticalSetup",
    "RGBColor",
    "layer_thickness",
    "render_color",
    "wavelength_grid",
    "CameraResponse",
    "DispersionTable",
    "SpectralCurve",
    "interpolate_nk",
    "load_camera",
    "load_dispersion",
    "load_spectral_curve",
    "Film",
    "LayerStack",
    "amplitude_reflection",
    "reflectance",
    "reflectance_spectrum",
]
