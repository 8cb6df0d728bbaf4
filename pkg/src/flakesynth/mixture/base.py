"""Interface shared by the contrast classifiers."""

from typing import List, Protocol, Tuple, runtime_checkable

import numpy as np


@runtime_checkable
class Classifier(Protocol):
    """Batched per-point classification with density-based rejection."""

    kind: str
    class_ids: List[int]
    class_names: List[str]

    def classify(self, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Posteriors (N, K) and rejection flags (N,) for raw (N, 3) contrast points."""
        ...
