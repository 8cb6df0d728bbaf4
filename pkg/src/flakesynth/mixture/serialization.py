"""Versioned JSON model files for both classifier kinds."""

import json
from pathlib import Path
from typing import Any, Dict, List, Literal, Union

import numpy as np
import torch
from pydantic import BaseModel, ValidationError

from ..core.config import AMMSettings
from ..core.errors import FlakeSynthError, ModelFormatError
from ..core.fileio import atomic_write_text
from .amm import DTYPE, AMMModel, AMMNetwork
from .gaussian import GaussianDensities, GMMModel
from .preprocessing import Standardizer

FORMAT_VERSION = 1

Matrix = List[List[float]]


class StandardizerFile(BaseModel):
    mean: List[float]
    std: List[float]


class DensitiesFile(BaseModel):
    means: Matrix
    covariances: List[Matrix]
    priors: List[float]


class _ModelFile(BaseModel):
    format_version: int
    class_ids: List[int]
    class_names: List[str]
    standardizer: StandardizerFile
    densities: DensitiesFile
    threshold: float
    config: Dict[str, Any] = {}


class GMMFile(_ModelFile):
    kind: Literal["gmm"]


class LinearState(BaseModel):
    weight: Matrix
    bias: List[float]


class SpectralState(LinearState):
    u: List[float]
    scale: float


class AMMFile(_ModelFile):
    kind: Literal["amm"]
    amm: Dict[str, Any]
    input_proj: LinearState
    blocks: List[SpectralState]
    head: LinearState
    metrics: Dict[str, float] = {}


FittedModel = Union[GMMModel, AMMModel]


def _common(model: FittedModel) -> Dict[str, Any]:
    return {
        "format_version": FORMAT_VERSION,
        "kind": model.kind,
        "class_ids": list(model.class_ids),
        "class_names": list(model.class_names),
        "standardizer": model.standardizer.to_dict(),
        "densities": model.densities.to_dict(),
        "threshold": model.threshold,
        "config": model.config,
    }


def _linear(layer: torch.nn.Linear) -> Dict[str, Any]:
    return {"weight": layer.weight.detach().tolist(), "bias": layer.bias.detach().tolist()}


def model_to_dict(model: FittedModel) -> Dict[str, Any]:
    data = _common(model)
    if isinstance(model, AMMModel):
        network = model.network
        data.update(
            amm=network.settings.model_dump(),
            input_proj=_linear(network.input_proj),
            blocks=[
                {**_linear(block), "u": block.u.tolist(), "scale": float(block.scale)}
                for block in network.blocks
            ],
            head=_linear(network.head),
            metrics=model.metrics,
        )
    return data


def save_model(model: FittedModel, path: Union[str, Path]) -> None:
    """Write the model as JSON; floats keep their shortest round-trip representation."""
    atomic_write_text(path, json.dumps(model_to_dict(model), indent=1))


def _load_linear(layer: torch.nn.Linear, state: LinearState) -> None:
    weight = torch.tensor(state.weight, dtype=DTYPE)
    bias = torch.tensor(state.bias, dtype=DTYPE)
    if weight.shape != layer.weight.shape or bias.shape != layer.bias.shape:
        raise ModelFormatError(
            f"layer shape {tuple(weight.shape)} does not match the architecture {tuple(layer.weight.shape)}"
        )
    with torch.no_grad():
        layer.weight.copy_(weight)
        layer.bias.copy_(bias)


def _build_amm(document: AMMFile, standardizer: Standardizer, densities: GaussianDensities) -> AMMModel:
    settings = AMMSettings(**document.amm)
    if len(document.blocks) != settings.depth:
        raise ModelFormatError(f"{len(document.blocks)} blocks stored, architecture has depth {settings.depth}")
    network = AMMNetwork(settings, len(document.class_ids), torch.Generator().manual_seed(0))
    _load_linear(network.input_proj, document.input_proj)
    _load_linear(network.head, document.head)
    for block, state in zip(network.blocks, document.blocks):
        _load_linear(block, state)
        with torch.no_grad():
            block.u.copy_(torch.tensor(state.u, dtype=DTYPE))
            block.scale.fill_(state.scale)
    network.eval()
    return AMMModel(
        list(document.class_ids), list(document.class_names), standardizer, network, densities,
        document.threshold, document.config, dict(document.metrics),
    )


def model_from_dict(data: Dict[str, Any]) -> FittedModel:
    if not isinstance(data, dict):
        raise ModelFormatError("model file must contain a JSON object")
    version = data.get("format_version")
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported model format_version {version!r}")
    kind = data.get("kind")
    schema = {"gmm": GMMFile, "amm": AMMFile}.get(kind)
    if schema is None:
        raise ModelFormatError(f"unknown model kind {kind!r}")
    try:
        document = schema.model_validate(data)
        standardizer = Standardizer(
            np.asarray(document.standardizer.mean, dtype=float), np.asarray(document.standardizer.std, dtype=float)
        )
        densities = GaussianDensities.from_dict(document.densities.model_dump())
        if densities.num_classes != len(document.class_ids):
            raise ModelFormatError("number of Gaussians does not match the class list")
        if isinstance(document, AMMFile):
            return _build_amm(document, standardizer, densities)
        return GMMModel(
            list(document.class_ids), list(document.class_names), standardizer, densities,
            document.threshold, document.config,
        )
    except ModelFormatError:
        raise
    except (ValidationError, FlakeSynthError, ValueError, RuntimeError) as e:
        raise ModelFormatError(f"invalid {kind} model: {e}") from None


def load_model(path: Union[str, Path]) -> FittedModel:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ModelFormatError(f"{path}: model file not found") from None
    except ValueError as e:
        raise ModelFormatError(f"{path}: not valid JSON ({e})") from None
    try:
        return model_from_dict(data)
    except ModelFormatError as e:
        raise ModelFormatError(f"{path}: {e}") from None
