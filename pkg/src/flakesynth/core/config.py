"""Configuration management for flakesynth.

Settings are grouped in sections and consolidated in one ``PipelineConfig``.
Values come from in-code defaults and an optional TOML file; the environment
is deliberately not consulted so that every run is reproducible from the
config file and the seed alone.
"""

import sys
from importlib import resources
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple, Union

from pydantic import Field, ValidationError, field_validator, model_validator
from pydantic_settings import BaseSettings, PydanticBaseSettingsSource, SettingsConfigDict

from .errors import ConfigError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

Range = Tuple[float, float]
IntRange = Tuple[int, int]

OXIDE_PRESETS: Dict[str, Range] = {
    "low": (85.0, 95.0),
    "medium": (80.0, 100.0),
    "high": (70.0, 110.0),
}


class _Section(BaseSettings):
    """Base for all settings sections: init values only, unknown keys rejected."""

    model_config = SettingsConfigDict(extra="forbid", frozen=True)

    @classmethod
    def settings_customise_sources(
        cls,
        settings_cls,
        init_settings: PydanticBaseSettingsSource,
        env_settings: PydanticBaseSettingsSource,
        dotenv_settings: PydanticBaseSettingsSource,
        file_secret_settings: PydanticBaseSettingsSource,
    ) -> Tuple[PydanticBaseSettingsSource, ...]:
        return (init_settings,)


def _check_range(value, name: str):
    lo, hi = value
    if lo > hi:
        raise ValueError(f"{name}: lower bound {lo} exceeds upper bound {hi}")
    return value


class MaterialSettings(_Section):
    """Optical and annotation settings of one 2D material."""

    dispersion: str
    layer_thickness_nm: float = Field(gt=0)
    annotated_classes: int = Field(ge=1)


DEFAULT_MATERIALS: Dict[str, MaterialSettings] = {
    "graphene": MaterialSettings(dispersion="graphene.txt", layer_thickness_nm=0.335, annotated_classes=4),
    "hBN": MaterialSettings(dispersion="hBN.txt", layer_thickness_nm=0.333, annotated_classes=3),
    "WSe2": MaterialSettings(dispersion="WSe2.txt", layer_thickness_nm=0.65, annotated_classes=3),
    "WS2": MaterialSettings(dispersion="WS2.txt", layer_thickness_nm=0.65, annotated_classes=1),
    "MoSe2": MaterialSettings(dispersion="MoSe2.txt", layer_thickness_nm=0.65, annotated_classes=2),
    "CrI3": MaterialSettings(dispersion="CrI3.txt", layer_thickness_nm=0.7, annotated_classes=3),
    "TaS2": MaterialSettings(dispersion="TaS2.txt", layer_thickness_nm=0.6, annotated_classes=3),
}


class OpticsSettings(_Section):
    """Substrate, illumination and camera used for rendering."""

    substrate: str = "Si.txt"
    oxide: str = "SiO2.txt"
    light_source: str = "flat.txt"
    white_reference: str = "flat.txt"
    camera: Tuple[str, str, str] = ("camera_r.txt", "camera_g.txt", "camera_b.txt")
    ambient_n: float = Field(default=1.0, gt=0)
    grid_start_nm: float = 380.0
    grid_stop_nm: float = 780.0
    grid_step_nm: float = Field(default=5.0, gt=0)

    @model_validator(mode="after")
    def _grid_order(self):
        if self.grid_stop_nm < self.grid_start_nm:
            raise ValueError("grid_stop_nm must not be below grid_start_nm")
        return self


class SceneSettings(_Section):
    """Shape placement settings of the synthetic scene sampler."""

    material: str = "graphene"
    image_width: int = Field(default=512, ge=8)
    image_height: int = Field(default=512, ge=8)
    shape_count: IntRange = (1, 500)
    scale: Range = (0.5, 1.5)
    rotation_deg: Range = (0.0, 360.0)
    layer_counts: IntRange = (1, 10)
    layer_weights: Optional[List[float]] = None
    oxide_thickness_nm: Union[Range, Literal["low", "medium", "high"]] = "low"
    annotated_classes: Optional[int] = Field(default=None, ge=1)
    min_surviving_fraction: float = Field(default=0.5, gt=0, le=1)
    max_retries: int = Field(default=5, ge=0)
    min_instance_area: int = Field(default=0, ge=0)
    merge_thick_instances: bool = True

    @field_validator("shape_count")
    @classmethod
    def _count_range(cls, value):
        _check_range(value, "shape_count")
        if value[0] < 1 or value[1] > 500:
            raise ValueError("shape_count must lie within [1, 500]")
        return value

    @field_validator("layer_counts")
    @classmethod
    def _layer_range(cls, value):
        _check_range(value, "layer_counts")
        if value[0] < 1:
            raise ValueError("layer_counts must start at 1 or above")
        return value

    @field_validator("scale", "rotation_deg")
    @classmethod
    def _ranges(cls, value, info):
        return _check_range(value, info.field_name)

    @field_validator("oxide_thickness_nm")
    @classmethod
    def _oxide(cls, value):
        if isinstance(value, str):
            return value
        return _check_range(value, "oxide_thickness_nm")

    @model_validator(mode="after")
    def _weights(self):
        if self.layer_weights is not None:
            lo, hi = self.layer_counts
            if len(self.layer_weights) != hi - lo + 1:
                raise ValueError("layer_weights needs one weight per layer count")
            if min(self.layer_weights) < 0 or sum(self.layer_weights) <= 0:
                raise ValueError("layer_weights must be non-negative with a positive sum")
        return self

    def oxide_range(self) -> Range:
        if isinstance(self.oxide_thickness_nm, str):
            return OXIDE_PRESETS[self.oxide_thickness_nm]
        return self.oxide_thickness_nm


class PostprocessSettings(_Section):
    """Camera-realism effects; every range is sampled per image."""

    residue_coverage: Range = (0.0, 0.15)
    residue_opacity: Range = (0.1, 0.4)
    residue_tint: Range = (0.3, 0.7)
    residue_feature_px: Range = (40.0, 160.0)
    shadow_count: IntRange = (0, 2)
    shadow_strength: Range = (0.05, 0.25)
    shadow_softness_px: Range = (10.0, 60.0)
    vignette_strength: Range = (0.0, 0.3)
    noise_sigma: Range = (0.0, 0.01)

    @field_validator("*")
    @classmethod
    def _ranges(cls, value, info):
        return _check_range(value, info.field_name)

    @classmethod
    def disabled(cls) -> "PostprocessSettings":
        zero = (0.0, 0.0)
        return cls(
            residue_coverage=zero,
            shadow_count=(0, 0),
            vignette_strength=zero,
            noise_sigma=zero,
        )


class MiningSettings(_Section):
    """Shape mining thresholds and quality filter."""

    band_count: int = Field(default=8, ge=1)
    percentile_low: float = Field(default=1.0, ge=0, le=100)
    percentile_high: float = Field(default=99.0, ge=0, le=100)
    connectivity: Literal[4, 8] = 8
    min_area: int = Field(default=200, ge=1)
    max_area_fraction: float = Field(default=0.25, gt=0, le=1)
    min_solidity: float = Field(default=0.6, ge=0, le=1)
    max_border_fraction: float = Field(default=0.1, ge=0, le=1)


class PreprocessSettings(_Section):
    """Contrast distribution cleanup before classifier training."""

    knn_k: int = Field(default=10, ge=1)
    dbscan_eps: float = Field(default=0.1, gt=0)
    dbscan_min_pts: int = Field(default=10, ge=1)
    erode_masks: bool = True
    background_points: int = Field(default=2000, ge=0)
    max_points_per_class: Optional[int] = Field(default=3000, ge=1)


class AMMSettings(_Section):
    """Architecture of the arbitrary mixture model."""

    input_dim: int = Field(default=3, ge=1)
    embedding_dim: int = Field(default=16, ge=1)
    depth: int = Field(default=4, ge=0)
    spectral_coefficient: float = Field(default=0.5, gt=0)
    dropout: float = Field(default=0.1, ge=0, lt=1)
    leaky_slope: float = Field(default=0.01, ge=0, le=1)


class TrainSettings(_Section):
    """Optimizer and fitting hyperparameters."""

    learning_rate: float = Field(default=0.01, gt=0)
    beta1: float = Field(default=0.9, gt=0, lt=1)
    beta2: float = Field(default=0.999, gt=0, lt=1)
    eps: float = Field(default=1e-8, gt=0)
    batch_size: int = Field(default=10000, ge=1)
    iterations: int = Field(default=5000, ge=1)
    seed: int = 0
    ridge: float = Field(default=1e-6, gt=0)
    # extra covariance diagonal, as a fraction of the class's mean per-dimension variance
    covariance_floor: float = Field(default=0.1, ge=0)
    rejection_quantile: float = Field(default=0.001, ge=0, lt=1)
    log_every: int = Field(default=500, ge=1)


class DetectorSettings(_Section):
    """Classical detector parameters."""

    min_area: int = Field(default=200, ge=1)
    opening_radius: int = Field(default=1, ge=0)
    rejection: bool = True


class EvaluationSettings(_Section):
    """AP50 matching settings."""

    iou_threshold: float = Field(default=0.5, gt=0, le=1)
    iou_mode: Literal["mask", "box"] = "mask"


class AppSettings(_Section):
    """Logging and process-level settings."""

    log_level: str = "INFO"
    log_file: Optional[str] = None
    jobs: int = Field(default=1, ge=1)


class PipelineConfig(_Section):
    """Consolidated settings for the entire pipeline."""

    seed: int = 0
    materials: Dict[str, MaterialSettings] = Field(default_factory=lambda: dict(DEFAULT_MATERIALS))
    optics: OpticsSettings = OpticsSettings()
    scene: SceneSettings = SceneSettings()
    postprocess: PostprocessSettings = PostprocessSettings()
    mining: MiningSettings = MiningSettings()
    preprocess: PreprocessSettings = PreprocessSettings()
    amm: AMMSettings = AMMSettings()
    train: TrainSettings = TrainSettings()
    detector: DetectorSettings = DetectorSettings()
    evaluation: EvaluationSettings = EvaluationSettings()
    app: AppSettings = AppSettings()
    base_dir: Optional[str] = None

    @model_validator(mode="after")
    def _scene_material_known(self):
        if self.scene.material not in self.materials:
            raise ValueError(f"scene.material '{self.scene.material}' has no entry under [materials]")
        return self

    def material(self, name: Optional[str] = None) -> MaterialSettings:
        name = name or self.scene.material
        try:
            return self.materials[name]
        except KeyError:
            raise ConfigError(f"unknown material '{name}'", key=f"materials.{name}") from None

    def annotated_classes(self) -> int:
        if self.scene.annotated_classes is not None:
            return self.scene.annotated_classes
        return self.material().annotated_classes

    def resolve(self, name: str, kind: str) -> Path:
        """Locate a data file: absolute, relative to the config file, or bundled."""
        return resolve_data_file(name, kind, self.base_dir)

    def echo(self) -> Dict[str, Any]:
        """JSON-able dump echoed into output manifests."""
        return self.model_dump(mode="json", exclude={"base_dir"})

    def check_files(self) -> None:
        for name, material in self.materials.items():
            self.resolve(material.dispersion, "materials")
        self.resolve(self.optics.substrate, "materials")
        self.resolve(self.optics.oxide, "materials")
        self.resolve(self.optics.light_source, "spectra")
        self.resolve(self.optics.white_reference, "spectra")
        for curve in self.optics.camera:
            self.resolve(curve, "spectra")


def bundled_data_dir(kind: str) -> Path:
    return Path(str(resources.files("flakesynth.data").joinpath(kind)))


def default_config_path() -> Path:
    """The bundled TOML file spelling out every default."""
    return Path(str(resources.files("flakesynth.data").joinpath("default.toml")))


def resolve_data_file(name: str, kind: str, base_dir: Optional[str] = None) -> Path:
    candidates = [Path(name)]
    if base_dir is not None and not Path(name).is_absolute():
        candidates.insert(0, Path(base_dir) / name)
    candidates.append(bundled_data_dir(kind) / name)
    for candidate in candidates:
        if candidate.is_file():
            return candidate
    raise ConfigError(f"data file not found ({kind})", key=name)


def _first_error(error: ValidationError) -> Tuple[str, str]:
    first = error.errors()[0]
    key = ".".join(str(part) for part in first["loc"]) or "<root>"
    return key, first["msg"]


def load_config(path: Optional[Union[str, Path]] = None, **overrides: Any) -> PipelineConfig:
    """Load a pipeline config from TOML (or defaults) and verify referenced files."""
    data: Dict[str, Any] = {}
    file_name = None
    if path is not None:
        file_name = str(path)
        try:
            with open(path, "rb") as handle:
                data = tomllib.load(handle)
        except FileNotFoundError:
            raise ConfigError("config file not found", file=file_name) from None
        except tomllib.TOMLDecodeError as e:
            raise ConfigError(f"invalid TOML: {e}", file=file_name) from None
        data.setdefault("base_dir", str(Path(path).resolve().parent))
    if "materials" in data:
        merged = {name: m.model_dump() for name, m in DEFAULT_MATERIALS.items()}
        merged.update(data["materials"])
        data["materials"] = merged
    data.update({key: value for key, value in overrides.items() if value is not None})
    try:
        config = PipelineConfig(**data)
    except ValidationError as e:
        key, reason = _first_error(e)
        raise ConfigError(reason, file=file_name, key=key) from None
    try:
        config.check_files()
    except ConfigError as e:
        raise ConfigError(e.reason, file=file_name, key=e.key) from None
    return config
