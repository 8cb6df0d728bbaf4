"""Tabulated optical data: dispersion tables, spectral curves and camera responses."""

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence, Tuple, Union

import numpy as np

from ..core.errors import OpticsError, OutOfRangeError

ArrayLike = Union[float, Sequence[float], np.ndarray]


def _strictly_increasing(wavelengths: np.ndarray, name: str) -> None:
    if wavelengths.ndim != 1 or wavelengths.size < 2:
        raise OpticsError(f"'{name}' needs at least 2 samples")
    if not np.all(np.isfinite(wavelengths)) or np.any(np.diff(wavelengths) <= 0):
        raise OpticsError(f"'{name}' wavelengths must be finite and strictly increasing")


def _check_coverage(name: str, wavelengths: np.ndarray, query: np.ndarray) -> None:
    lo, hi = float(wavelengths[0]), float(wavelengths[-1])
    outside = (query < lo) | (query > hi) | ~np.isfinite(query)
    if np.any(outside):
        raise OutOfRangeError(name, float(np.asarray(query)[outside].flat[0]), lo, hi)


@dataclass(frozen=True, eq=False)
class DispersionTable:
    """Wavelength-sampled complex refractive index n - i*k of a material."""

    material_name: str
    wavelengths: np.ndarray
    n: np.ndarray
    k: np.ndarray

    def __post_init__(self):
        for attr in ("wavelengths", "n", "k"):
            array = np.asarray(getattr(self, attr), dtype=float)
            array.setflags(write=False)
            object.__setattr__(self, attr, array)
        _strictly_increasing(self.wavelengths, self.material_name)
        if self.n.shape != self.wavelengths.shape or self.k.shape != self.wavelengths.shape:
            raise OpticsError(f"'{self.material_name}': n, k and wavelength columns differ in length")
        if np.any(self.n < 0) or np.any(self.k < 0) or not np.all(np.isfinite(self.n + self.k)):
            raise OpticsError(f"'{self.material_name}': n and k must be finite and non-negative")

    @classmethod
    def from_samples(cls, material_name: str, samples: Iterable[Tuple[float, float, float]]) -> "DispersionTable":
        rows = np.asarray(list(samples), dtype=float).reshape(-1, 3)
        return cls(material_name, rows[:, 0], rows[:, 1], rows[:, 2])

    @classmethod
    def constant(cls, material_name: str, n: float, k: float = 0.0,
                 span: Tuple[float, float] = (300.0, 1000.0)) -> "DispersionTable":
        return cls.from_samples(material_name, [(span[0], n, k), (span[1], n, k)])

    @property
    def span(self) -> Tuple[float, float]:
        return float(self.wavelengths[0]), float(self.wavelengths[-1])

    def covers(self, grid: ArrayLike) -> bool:
        grid = np.asarray(grid, dtype=float)
        return bool(grid.min() >= self.wavelengths[0] and grid.max() <= self.wavelengths[-1])


def interpolate_nk(table: DispersionTable, wavelength: ArrayLike) -> Union[complex, np.ndarray]:
    """Complex index n - i*k at ``wavelength`` by independent linear interpolation of n and k."""
    query = np.asarray(wavelength, dtype=float)
    _check_coverage(table.material_name, table.wavelengths, query)
    n = np.interp(query, table.wavelengths, table.n)
    k = np.interp(query, table.wavelengths, table.k)
    value = n - 1j * k
    if value.ndim == 0:
        return complex(value)
    return value


@dataclass(frozen=True, eq=False)
class SpectralCurve:
    """Non-negative function of wavelength (light source or sensor response)."""

    name: str
    wavelengths: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        for attr in ("wavelengths", "values"):
            array = np.asarray(getattr(self, attr), dtype=float)
            array.setflags(write=False)
            object.__setattr__(self, attr, array)
        _strictly_increasing(self.wavelengths, self.name)
        if self.values.shape != self.wavelengths.shape:
            raise OpticsError(f"'{self.name}': value and wavelength columns differ in length")
        if np.any(self.values < 0) or not np.all(np.isfinite(self.values)):
            raise OpticsError(f"'{self.name}': values must be finite and non-negative")

    @classmethod
    def from_samples(cls, name: str, samples: Iterable[Tuple[float, float]]) -> "SpectralCurve":
        rows = np.asarray(list(samples), dtype=float).reshape(-1, 2)
        return cls(name, rows[:, 0], rows[:, 1])

    @classmethod
    def flat(cls, name: str = "flat", value: float = 1.0,
             span: Tuple[float, float] = (300.0, 1000.0)) -> "SpectralCurve":
        return cls.from_samples(name, [(span[0], value), (span[1], value)])

    def at(self, grid: ArrayLike) -> np.ndarray:
        query = np.asarray(grid, dtype=float)
        _check_coverage(self.name, self.wavelengths, query)
        return np.interp(query, self.wavelengths, self.values)

    def scaled(self, factor: float) -> "SpectralCurve":
        return SpectralCurve(self.name, self.wavelengths, self.values * factor)


@dataclass(frozen=True, eq=False)
class CameraResponse:
    """RGB sensor activation curves."""

    r: SpectralCurve
    g: SpectralCurve
    b: SpectralCurve

    @property
    def channels(self) -> Tuple[SpectralCurve, SpectralCurve, SpectralCurve]:
        return self.r, self.g, self.b

    def at(self, grid: ArrayLike) -> np.ndarray:
        """(3, len(grid)) response matrix."""
        return np.stack([curve.at(grid) for curve in self.channels])


def _read_rows(path: Path, columns: int) -> Tuple[Optional[str], np.ndarray]:
    header = None
    rows = []
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise OpticsError(f"{path}: cannot read ({e})") from None
    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith("#"):
            body = stripped.lstrip("#").strip()
            if "=" in body and header is None and body.split("=", 1)[0].strip() in ("material", "curve"):
                header = body.split("=", 1)[1].strip()
            continue
        fields = stripped.split()
        if len(fields) != columns:
            raise OpticsError(f"{path}:{line_no}: expected {columns} columns, found {len(fields)}")
        try:
            rows.append([float(field) for field in fields])
        except ValueError:
            raise OpticsError(f"{path}:{line_no}: non-numeric value") from None
    return header, np.asarray(rows, dtype=float).reshape(-1, columns)


def load_dispersion(path: Union[str, Path]) -> DispersionTable:
    """Read a ``wavelength_nm n k`` table with a ``# material=<name>`` header."""
    name, rows = _read_rows(Path(path), 3)
    if name is None:
        raise OpticsError(f"{path}: missing '# material=<name>' header")
    try:
        return DispersionTable(name, rows[:, 0], rows[:, 1], rows[:, 2])
    except OpticsError as e:
        raise OpticsError(f"{path}: {e}") from None


def load_spectral_curve(path: Union[str, Path]) -> SpectralCurve:
    """Read a two-column ``wavelength_nm value`` curve."""
    name, rows = _read_rows(Path(path), 2)
    try:
        return SpectralCurve(name or Path(path).stem, rows[:, 0], rows[:, 1])
    except OpticsError as e:
        raise OpticsError(f"{path}: {e}") from None


def load_camera(paths: Sequence[Union[str, Path]]) -> CameraResponse:
    if len(paths) != 3:
        raise OpticsError("camera response needs exactly three curve files (r, g, b)")
    return CameraResponse(*(load_spectral_curve(path) for path in paths))
