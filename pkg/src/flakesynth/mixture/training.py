"""End-to-end classifier fitting from an annotated image set."""

from pathlib import Path
from typing import Optional, Sequence

from loguru import logger

from ..annotations.schemas import DatasetAnnotations
from ..core.config import PipelineConfig
from ..core.errors import PreprocessError
from ..core.rng import derive_rng
from .amm import train_amm
from .base import Classifier
from .dataset import collect_contrasts
from .gaussian import fit_gmm
from .preprocessing import preprocess

CLASSIFIER_KINDS = ("gmm", "amm")


def train_classifier(kind: str, annotations: DatasetAnnotations, root: Path, config: PipelineConfig,
                     image_ids: Optional[Sequence[str]] = None) -> Classifier:
    """Collect contrasts, preprocess them and fit a ``gmm`` or ``amm`` classifier."""
    if kind not in CLASSIFIER_KINDS:
        raise PreprocessError(f"unknown classifier kind '{kind}', expected one of {CLASSIFIER_KINDS}")
    settings = config.preprocess
    data = collect_contrasts(
        annotations,
        root,
        erode=settings.erode_masks,
        image_ids=image_ids,
        background_points=settings.background_points,
        max_points_per_class=settings.max_points_per_class,
        rng=derive_rng(config.train.seed, "collect"),
    )
    data, standardizer = preprocess(data, settings, derive_rng(config.train.seed, "balance"))
    echo = config.echo()
    if kind == "gmm":
        model = fit_gmm(data, standardizer, config.train.ridge, config.train.rejection_quantile, echo,
                        covariance_floor=config.train.covariance_floor)
    else:
        model = train_amm(data, config.amm, config.train, standardizer, echo)
    logger.info(f"Trained {kind} classifier on {len(data)} points, classes {model.class_names}")
    return model
