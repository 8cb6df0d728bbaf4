"""Repeated few-shot train / detect / evaluate runs."""

from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
from loguru import logger

from ..annotations.io import read_dataset
from ..annotations.schemas import BenchmarkReport
from ..core.config import PipelineConfig
from ..core.rng import derive_rng
from ..detector.detector import DetectorParams, detect_directory
from ..mixture.dataset import select_few_shot_subset
from ..mixture.training import CLASSIFIER_KINDS, train_classifier
from .metrics import MatchConfig, ap50


class BenchmarkRunner:
    """Trains every classifier kind on R few-shot subsets and scores it on a fixed test set."""

    def __init__(self, config: PipelineConfig, train_dir: Path, test_dir: Path,
                 kinds: Sequence[str] = CLASSIFIER_KINDS, jobs: int = 1):
        self.config = config
        self.train_dir = Path(train_dir)
        self.test_dir = Path(test_dir)
        self.kinds = list(kinds)
        self.jobs = jobs
        self.train_set, _ = read_dataset(self.train_dir)
        self.test_set, _ = read_dataset(self.test_dir)
        self.params = DetectorParams.from_settings(config.detector)
        self.match = MatchConfig.from_settings(config.evaluation)

    def subset(self, repeat: int, images_per_class: Optional[int]) -> Optional[List[str]]:
        if images_per_class is None:
            return None
        return select_few_shot_subset(self.train_set, images_per_class, derive_rng(self.config.seed, "subset", repeat))

    def run_once(self, kind: str, repeat: int, image_ids: Optional[List[str]]) -> float:
        # each repeat also reseeds network initialization and balancing
        train = self.config.train.model_copy(update={"seed": self.config.train.seed + repeat})
        config = self.config.model_copy(update={"train": train})
        model = train_classifier(kind, self.train_set, self.train_dir, config, image_ids=image_ids)
        detections = detect_directory(model, self.test_dir, self.params, jobs=self.jobs, reference=self.test_set)
        return ap50(detections, self.test_set, self.match).mean_ap

    def run(self, repeats: int, images_per_class: Optional[int] = None) -> BenchmarkReport:
        if repeats < 1:
            raise ValueError(f"repeats must be >= 1, got {repeats}")
        results: Dict[str, List[float]] = {kind: [] for kind in self.kinds}
        for repeat in range(repeats):
            image_ids = self.subset(repeat, images_per_class)
            used = len(image_ids) if image_ids is not None else len(self.train_set.images)
            for kind in self.kinds:
                score = self.run_once(kind, repeat, image_ids)
                results[kind].append(score)
                logger.info(f"repeat {repeat + 1}/{repeats} {kind}: AP50 {score:.4f} ({used} training images)")
        return BenchmarkReport(
            images_per_class=images_per_class,
            repeats=repeats,
            results=results,
            mean={kind: float(np.mean(scores)) for kind, scores in results.items()},
            std={kind: float(np.std(scores)) for kind, scores in results.items()},
        )


def benchmark(config: PipelineConfig, train_dir: Path, test_dir: Path, repeats: int,
              images_per_class: Optional[int] = None, kinds: Sequence[str] = CLASSIFIER_KINDS,
              jobs: int = 1) -> BenchmarkReport:
    """Mean and standard deviation of AP50 per classifier kind over ``repeats`` subsets."""
    return BenchmarkRunner(config, train_dir, test_dir, kinds, jobs).run(repeats, images_per_class)
