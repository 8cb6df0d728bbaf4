"""Normal-incidence thin-film reflectance by the transfer-matrix (characteristic matrix) method.

Complex indices follow the N = n - i*k convention with exp(+i*w*t) time
dependence. Each film of index N and thickness d contributes the matrix

    [[cos(delta),        i*sin(delta)/N],
     [i*N*sin(delta),    cos(delta)    ]],   delta = 2*pi*N*d / wavelength

and the stack admittance [B, C] = M_1 ... M_q [1, N_substrate] yields the
amplitude reflection r = (N_0*B - C) / (N_0*B + C).
"""

from dataclasses import dataclass, field
from typing import Sequence, Tuple, Union

import numpy as np

from ..core.errors import OpticsError
from .dispersion import DispersionTable, interpolate_nk


@dataclass(frozen=True, eq=False)
class Film:
    dispersion: DispersionTable
    thickness: float

    def __post_init__(self):
        if not np.isfinite(self.thickness) or self.thickness < 0:
            raise OpticsError(
                f"film '{self.dispersion.material_name}': thickness must be finite and >= 0, got {self.thickness}"
            )


@dataclass(frozen=True, eq=False)
class LayerStack:
    """Ambient medium, films ordered top to bottom, semi-infinite substrate."""

    substrate: DispersionTable
    films: Tuple[Film, ...] = field(default_factory=tuple)
    ambient_n: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "films", tuple(self.films))
        if self.substrate is None:
            raise OpticsError("layer stack needs a substrate")
        if not self.ambient_n > 0:
            raise OpticsError("ambient index must be positive")

    @classmethod
    def build(cls, substrate: DispersionTable, films: Sequence[Tuple[DispersionTable, float]] = (),
              ambient_n: float = 1.0) -> "LayerStack":
        return cls(substrate, tuple(Film(d, float(t)) for d, t in films), ambient_n)


def amplitude_reflection(stack: LayerStack, wavelengths: Union[float, np.ndarray]) -> np.ndarray:
    """Complex amplitude reflection coefficient over ``wavelengths`` (nm)."""
    lam = np.atleast_1d(np.asarray(wavelengths, dtype=float))
    n0 = stack.ambient_n
    n_sub = np.atleast_1d(interpolate_nk(stack.substrate, lam))

    # running characteristic-matrix product, one 2x2 per wavelength
    m11 = np.ones_like(lam, dtype=complex)
    m12 = np.zeros_like(lam, dtype=complex)
    m21 = np.zeros_like(lam, dtype=complex)
    m22 = np.ones_like(lam, dtype=complex)
    for film in stack.films:
        n_film = np.atleast_1d(interpolate_nk(film.dispersion, lam))
        if film.thickness == 0:
            continue
        delta = 2.0 * np.pi * n_film * film.thickness / lam
        cos_d = np.cos(delta)
        sin_d = np.sin(delta)
        a11, a12 = cos_d, 1j * sin_d / n_film
        a21, a22 = 1j * n_film * sin_d, cos_d
        m11, m12, m21, m22 = (
            m11 * a11 + m12 * a21,
            m11 * a12 + m12 * a22,
            m21 * a11 + m22 * a21,
            m21 * a12 + m22 * a22,
        )

    b = m11 + m12 * n_sub
    c = m21 + m22 * n_sub
    return (n0 * b - c) / (n0 * b + c)


def reflectance_spectrum(stack: LayerStack, wavelengths: Union[float, np.ndarray]) -> np.ndarray:
    """Reflectance |r|^2 evaluated on a wavelength grid."""
    return np.abs(amplitude_reflection(stack, wavelengths)) ** 2


def reflectance(stack: LayerStack, wavelength: float) -> float:
    """Coherent reflectance of the stack at one wavelength."""
    return float(reflectance_spectrum(stack, wavelength)[0])
