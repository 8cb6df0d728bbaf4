"""Contrast-space classifiers: preprocessing, GMM baseline and the arbitrary mixture model."""

from .amm import AMMModel, AMMNetwork, SpectralLinear, amm_forward, classify_amm, spectral_normalize, train_amm
from .base import Classifier
from .dataset import BACKGROUND_CLASS, LabeledContrastSet, collect_contrasts, select_few_shot_subset
from .gaussian import GaussianDensities, GMMModel, classify_gmm, fit_gmm
from .preprocessing import (
    Standardizer,
    balance_classes,
    dbscan_filter,
    knn_denoise,
    preprocess,
    standardize_fit_apply,
)
from .serialization import load_model, model_from_dict, model_to_dict, save_model
from .training import CLASSIFIER_KINDS, train_classifier

__all__ = [
    "AMMModel",
    "AMMNetwork",
    "SpectralLinear",
    "amm_forward",
    "classify_amm",
    "spectral_normalize",
    "train_amm",
    "Classifier",
    "BACKGROUND_CLASS",
    "LabeledContrastSet",
    "collect_contrasts",
    "select_few_shot_subset",
    "GaussianDensities",
    "GMMModel",
    "classify_gmm",
    "fit_gmm",
    "Standardizer",
    "balance_classes",
    "dbscan_filter",
    "knn_denoise",
    "preprocess",
    "standardize_fit_apply",
    "load_model",
    "model_from_dict",
    "model_to_dict",
    "save_model",
    "CLASSIFIER_KINDS",
    "train_classifier",
]
