"""Core module initialization."""

from .config import PipelineConfig, load_config
from .errors import FlakeSynthError
from .log import setup_logging
from .rng import derive_rng, derive_seed

__all__ = ["PipelineConfig", "load_config", "FlakeSynthError", "setup_logging", "derive_rng", "derive_seed"]
