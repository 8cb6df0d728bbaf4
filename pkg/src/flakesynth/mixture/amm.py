"""Arbitrary mixture model: a spectrally normalized residual network whose
embeddings are classified by class-conditional Gaussian densities.

All tensors are float64. Training is single-threaded and draws every random
number (initialization, batches, dropout) from one seeded ``torch.Generator``,
so a seed reproduces the weights bit for bit.
"""

import math
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
import torch
import torch.nn.functional as F
from loguru import logger
from torch import nn

from ..core.config import AMMSettings, TrainSettings
from ..core.errors import PreprocessError, TrainingError
from ..core.rng import derive_seed
from .dataset import LabeledContrastSet
from .gaussian import GaussianDensities
from .preprocessing import Standardizer

DTYPE = torch.float64
POWER_EPS = 1e-12
INITIAL_POWER_ITERATIONS = 15


def spectral_normalize(weight: torch.Tensor, coefficient: float, u: torch.Tensor,
                       update: bool = True) -> Tuple[torch.Tensor, torch.Tensor]:
    """One power-iteration step, then ``W * min(1, c / sigma)``.

    ``u`` is the persistent left singular vector estimate and is updated in
    place when ``update`` is set. The scale factor is computed without
    gradient tracking, so backpropagation sees it as a constant. Returns the
    normalized weight and the scale factor.
    """
    with torch.no_grad():
        v = weight.t() @ u
        v_norm = torch.linalg.vector_norm(v)
        if v_norm <= POWER_EPS:
            return weight, torch.ones((), dtype=weight.dtype)
        v = v / v_norm
        wv = weight @ v
        sigma = torch.linalg.vector_norm(wv)
        if update and sigma > POWER_EPS:
            u.copy_(wv / sigma)
        scale = torch.clamp(coefficient / sigma, max=1.0) if sigma > POWER_EPS else torch.ones((), dtype=weight.dtype)
    return weight * scale, scale


def _uniform(shape, bound: float, generator: torch.Generator) -> torch.Tensor:
    return (torch.rand(shape, generator=generator, dtype=DTYPE) * 2.0 - 1.0) * bound


class SpectralLinear(nn.Module):
    """Square linear layer whose matrix is spectrally normalized on every training call.

    Outside training the scale from the last training step is reused, so
    inference is a fixed affine map.
    """

    def __init__(self, dim: int, coefficient: float, generator: torch.Generator, gain: float = 0.5):
        super().__init__()
        self.coefficient = float(coefficient)
        raw = _uniform((dim, dim), 1.0, generator)
        sigma = torch.linalg.matrix_norm(raw, ord=2)
        self.weight = nn.Parameter(raw * (gain / sigma))
        self.bias = nn.Parameter(torch.zeros(dim, dtype=DTYPE))
        u = torch.randn(dim, generator=generator, dtype=DTYPE)
        self.register_buffer("u", u / torch.linalg.vector_norm(u))
        self.register_buffer("scale", torch.ones((), dtype=DTYPE))
        # start from a converged estimate, as torch.nn.utils.parametrizations.spectral_norm does
        self.refresh(INITIAL_POWER_ITERATIONS)

    def refresh(self, iterations: int = 1) -> None:
        """Run power iterations on the current weight and store the resulting scale."""
        for _ in range(max(1, iterations)):
            _, scale = spectral_normalize(self.weight.detach(), self.coefficient, self.u, update=True)
        self.scale.copy_(scale)

    def normalized_weight(self) -> torch.Tensor:
        return self.weight * self.scale

    def pending_weight(self) -> torch.Tensor:
        """The matrix the next training call will use; the power-iteration state is left alone."""
        weight, _ = spectral_normalize(self.weight.detach(), self.coefficient, self.u.clone())
        return weight

    def forward(self, h: torch.Tensor) -> torch.Tensor:
        if self.training:
            weight, scale = spectral_normalize(self.weight, self.coefficient, self.u, update=True)
            self.scale.copy_(scale)
        else:
            weight = self.normalized_weight()
        return F.linear(h, weight, self.bias)


class AMMNetwork(nn.Module):
    """Input projection, residual spectral blocks and a linear classification head."""

    def __init__(self, settings: AMMSettings, num_classes: int, generator: torch.Generator):
        super().__init__()
        self.settings = settings
        width = settings.embedding_dim
        self.input_proj = nn.Linear(settings.input_dim, width, dtype=DTYPE)
        self.blocks = nn.ModuleList(
            SpectralLinear(width, settings.spectral_coefficient, generator) for _ in range(settings.depth)
        )
        self.head = nn.Linear(width, num_classes, dtype=DTYPE)
        with torch.no_grad():
            for layer in (self.input_proj, self.head):
                bound = 1.0 / math.sqrt(layer.in_features)
                layer.weight.copy_(_uniform(layer.weight.shape, bound, generator))
                layer.bias.copy_(_uniform(layer.bias.shape, bound, generator))

    def forward(self, x: torch.Tensor, generator: Optional[torch.Generator] = None) -> Tuple[torch.Tensor, torch.Tensor]:
        h = self.input_proj(x)
        for block in self.blocks:
            update = F.leaky_relu(block(h), negative_slope=self.settings.leaky_slope)
            if self.training and self.settings.dropout > 0:
                keep = torch.rand(update.shape, generator=generator, dtype=DTYPE) >= self.settings.dropout
                update = update * keep / (1.0 - self.settings.dropout)
            h = h + update
        return h, self.head(h)

    def lipschitz_bound(self) -> float:
        """Upper bound of the embedding map's Lipschitz constant from the current weights."""
        with torch.no_grad():
            bound = float(torch.linalg.matrix_norm(self.input_proj.weight, ord=2))
            slope = max(1.0, self.settings.leaky_slope)
            for block in self.blocks:
                bound *= 1.0 + slope * float(torch.linalg.matrix_norm(block.normalized_weight(), ord=2))
        return bound


@dataclass(eq=False)
class AMMModel:
    """Trained network plus embedding-space Gaussians."""

    class_ids: List[int]
    class_names: List[str]
    standardizer: Standardizer
    network: AMMNetwork
    densities: GaussianDensities
    threshold: float
    config: Dict[str, Any] = field(default_factory=dict)
    metrics: Dict[str, float] = field(default_factory=dict)

    kind = "amm"

    def embed(self, points: np.ndarray, chunk: int = 65536) -> np.ndarray:
        """Inference-mode embeddings of already standardized points."""
        self.network.eval()
        out = []
        with torch.no_grad():
            for start in range(0, points.shape[0], chunk):
                batch = torch.as_tensor(points[start:start + chunk], dtype=DTYPE)
                out.append(self.network(batch)[0].numpy())
        return np.concatenate(out) if out else np.zeros((0, self.network.settings.embedding_dim))

    def classify(self, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Posteriors (N, K) and rejection flags (N,) for raw contrast points."""
        embedded = self.embed(self.standardizer.apply(np.atleast_2d(points)))
        posteriors, best = self.densities.posteriors(embedded)
        return posteriors, best < self.threshold


def amm_forward(network: AMMNetwork, points: np.ndarray, training: bool = False,
                generator: Optional[torch.Generator] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Embeddings and logits of standardized points; dropout only when ``training``."""
    was_training = network.training
    buffers = {name: buffer.clone() for name, buffer in network.named_buffers()}
    network.train(training)
    try:
        with torch.no_grad():
            embedding, logits = network(torch.as_tensor(np.atleast_2d(points), dtype=DTYPE), generator)
    finally:
        network.train(was_training)
        with torch.no_grad():
            for name, buffer in network.named_buffers():
                buffer.copy_(buffers[name])
    return embedding.numpy(), logits.numpy()


@contextmanager
def single_threaded():
    previous = torch.get_num_threads()
    torch.set_num_threads(1)
    try:
        yield
    finally:
        torch.set_num_threads(previous)


def _dataset_loss(network: AMMNetwork, x: torch.Tensor, y: torch.Tensor) -> float:
    network.eval()
    with torch.no_grad():
        return float(F.cross_entropy(network(x)[1], y))


def train_amm(data: LabeledContrastSet, amm: AMMSettings, train: TrainSettings,
              standardizer: Optional[Standardizer] = None, config: Optional[Dict[str, Any]] = None,
              on_step: Optional[Callable[[int, AMMNetwork], None]] = None) -> AMMModel:
    """Fit the network with softmax cross-entropy, then fit embedding Gaussians.

    ``data`` must already be preprocessed (denoised, filtered, standardized
    and balanced); ``standardizer`` is stored with the model. ``on_step`` is
    called with the iteration number and the network after every optimizer
    step.
    """
    if amm.input_dim != data.dim:
        raise PreprocessError(f"input_dim {amm.input_dim} does not match the data dimension {data.dim}")
    standardizer = standardizer or Standardizer.identity(data.dim)
    generator = torch.Generator().manual_seed(derive_seed(train.seed, "amm") % (2**63))
    x = torch.as_tensor(data.points, dtype=DTYPE)
    y = torch.as_tensor(data.labels, dtype=torch.long)
    n = x.shape[0]
    batch_size = min(train.batch_size, n)

    with single_threaded():
        network = AMMNetwork(amm, data.num_classes, generator)
        initial_loss = _dataset_loss(network, x, y)
        optimizer = torch.optim.Adam(
            network.parameters(), lr=train.learning_rate, betas=(train.beta1, train.beta2), eps=train.eps
        )
        network.train()
        for iteration in range(1, train.iterations + 1):
            index = torch.randint(n, (batch_size,), generator=generator)
            _, logits = network(x[index], generator)
            loss = F.cross_entropy(logits, y[index])
            optimizer.zero_grad()
            loss.backward()
            grad_norm = math.sqrt(sum(float((p.grad ** 2).sum()) for p in network.parameters() if p.grad is not None))
            if not (math.isfinite(float(loss)) and math.isfinite(grad_norm)):
                raise TrainingError(iteration, float(loss), grad_norm)
            optimizer.step()
            if on_step is not None:
                on_step(iteration, network)
            if iteration % train.log_every == 0 or iteration == train.iterations:
                logger.info(f"AMM iteration {iteration}/{train.iterations}: loss {float(loss):.6f}")

        for block in network.blocks:
            block.refresh()
        network.eval()
        final_loss = _dataset_loss(network, x, y)
        model = AMMModel(
            list(data.class_ids), list(data.class_names), standardizer, network,
            densities=None, threshold=0.0, config=config or {},
            metrics={"initial_loss": initial_loss, "final_loss": final_loss},
        )
        embedded = model.embed(data.points)
    priors = np.full(data.num_classes, 1.0 / data.num_classes)
    model.densities = GaussianDensities.fit(embedded, data.labels, data.num_classes, train.ridge, priors=priors,
                                            floor=train.covariance_floor)
    model.threshold = model.densities.rejection_threshold(embedded, data.labels, train.rejection_quantile)
    logger.info(f"AMM trained: loss {initial_loss:.4f} -> {final_loss:.4f}, threshold {model.threshold:.3f}")
    return model


def classify_amm(model: AMMModel, point: np.ndarray) -> Tuple[np.ndarray, bool]:
    """Single-point wrapper around ``AMMModel.classify``."""
    posteriors, rejected = model.classify(np.asarray(point, dtype=float)[None, :])
    return posteriors[0], bool(rejected[0])
