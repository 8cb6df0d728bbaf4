"""Class-conditional Gaussian densities and the contrast-space GMM classifier."""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from scipy.linalg import cholesky, solve_triangular
from scipy.special import logsumexp
from sklearn.mixture import GaussianMixture

from ..core.errors import PreprocessError
from .dataset import LabeledContrastSet
from .preprocessing import Standardizer


def _frozen_mixture(mean: np.ndarray, covariance: np.ndarray) -> GaussianMixture:
    """Single-component ``GaussianMixture`` with the given parameters.

    Fitted and loaded models are both rebuilt through here, so they score
    points with identical precision factors.
    """
    dim = mean.shape[0]
    lower = cholesky(covariance, lower=True)
    mixture = GaussianMixture(n_components=1, covariance_type="full")
    mixture.weights_ = np.ones(1)
    mixture.means_ = mean[None, :]
    mixture.covariances_ = covariance[None, :, :]
    mixture.precisions_cholesky_ = solve_triangular(lower, np.eye(dim), lower=True).T[None, :, :]
    mixture.n_features_in_ = dim
    mixture.converged_ = True
    return mixture


@dataclass(frozen=True, eq=False)
class GaussianDensities:
    """One full-covariance Gaussian per class plus class priors."""

    means: np.ndarray
    covariances: np.ndarray
    priors: np.ndarray
    _mixtures: List[GaussianMixture] = field(init=False, repr=False)

    def __post_init__(self):
        mixtures = []
        for k, (mean, covariance) in enumerate(zip(self.means, self.covariances)):
            try:
                mixtures.append(_frozen_mixture(mean, covariance))
            except np.linalg.LinAlgError:
                raise PreprocessError(f"covariance of class index {k} is not positive definite") from None
        object.__setattr__(self, "_mixtures", mixtures)

    @classmethod
    def fit(cls, points: np.ndarray, labels: np.ndarray, num_classes: int, ridge: float,
            priors: Optional[np.ndarray] = None, floor: float = 0.0) -> "GaussianDensities":
        """Sample mean and (maximum-likelihood) covariance per class.

        Each class covariance gets ``ridge + floor * v`` added to its diagonal,
        ``v`` being the class's mean per-dimension variance, so classes seen
        along a thin curve keep some width across it.
        """
        dim = points.shape[1]
        means = np.zeros((num_classes, dim))
        covariances = np.zeros((num_classes, dim, dim))
        counts = np.bincount(labels, minlength=num_classes)
        for k in range(num_classes):
            members = points[labels == k]
            if members.shape[0] < dim + 1:
                raise PreprocessError(
                    f"class index {k} has {members.shape[0]} points, need at least {dim + 1}"
                )
            reg_covar = ridge + floor * float(members.var(axis=0).mean())
            mixture = GaussianMixture(n_components=1, covariance_type="full", reg_covar=reg_covar,
                                      init_params="random_from_data", random_state=0).fit(members)
            means[k] = mixture.means_[0]
            covariances[k] = mixture.covariances_[0]
        if priors is None:
            priors = counts / counts.sum()
        return cls(means, covariances, np.asarray(priors, dtype=float))

    @property
    def num_classes(self) -> int:
        return int(self.means.shape[0])

    def log_densities(self, points: np.ndarray) -> np.ndarray:
        """(N, K) log N_k(x)."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        return np.column_stack([mixture.score_samples(points) for mixture in self._mixtures])

    def log_joint(self, points: np.ndarray) -> np.ndarray:
        """(N, K) log(pi_k N_k(x))."""
        with np.errstate(divide="ignore"):
            return self.log_densities(points) + np.log(self.priors)

    def posteriors(self, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Normalized posteriors and the best log joint density of each point."""
        joint = self.log_joint(points)
        posteriors = np.exp(joint - logsumexp(joint, axis=1, keepdims=True))
        return posteriors, joint.max(axis=1)

    def rejection_threshold(self, points: np.ndarray, labels: np.ndarray, quantile: float) -> float:
        """``quantile`` of the training points' log joint density under their own class."""
        own = self.log_joint(points)[np.arange(labels.size), labels]
        return float(np.quantile(own, quantile))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "means": self.means.tolist(),
            "covariances": self.covariances.tolist(),
            "priors": self.priors.tolist(),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "GaussianDensities":
        return cls(
            np.asarray(data["means"], dtype=float),
            np.asarray(data["covariances"], dtype=float),
            np.asarray(data["priors"], dtype=float),
        )


@dataclass(frozen=True, eq=False)
class GMMModel:
    """Per-class Gaussians fitted directly in standardized contrast space."""

    class_ids: List[int]
    class_names: List[str]
    standardizer: Standardizer
    densities: GaussianDensities
    threshold: float
    config: Dict[str, Any] = field(default_factory=dict)

    kind = "gmm"

    def classify(self, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Posteriors (N, K) and rejection flags (N,) for raw contrast points."""
        posteriors, best = self.densities.posteriors(self.standardizer.apply(np.atleast_2d(points)))
        return posteriors, best < self.threshold


def fit_gmm(data: LabeledContrastSet, standardizer: Optional[Standardizer] = None, ridge: float = 1e-6,
            rejection_quantile: float = 0.001, config: Optional[Dict[str, Any]] = None,
            covariance_floor: float = 0.0) -> GMMModel:
    """Fit one Gaussian per class to an already standardized contrast set.

    ``standardizer`` is the map that produced ``data`` from raw contrasts; it
    is stored with the model and applied to every point it classifies.
    ``covariance_floor`` is passed on to ``GaussianDensities.fit``.
    """
    standardizer = standardizer or Standardizer.identity(data.dim)
    densities = GaussianDensities.fit(data.points, data.labels, data.num_classes, ridge,
                                       floor=covariance_floor)
    threshold = densities.rejection_threshold(data.points, data.labels, rejection_quantile)
    return GMMModel(list(data.class_ids), list(data.class_names), standardizer, densities, threshold, config or {})


def classify_gmm(model: GMMModel, point: np.ndarray) -> Tuple[np.ndarray, bool]:
    """Single-point wrapper around ``GMMModel.classify``."""
    posteriors, rejected = model.classify(np.asarray(point, dtype=float)[None, :])
    return posteriors[0], bool(rejected[0])
