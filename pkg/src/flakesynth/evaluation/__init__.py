"""Detection quality metrics and few-shot benchmarks."""

from .benchmark import BenchmarkRunner, benchmark
from .metrics import MatchConfig, ScoredMask, SparseMask, ap50, average_precision, mask_iou, match_detections

__all__ = [
    "BenchmarkRunner",
    "benchmark",
    "MatchConfig",
    "ScoredMask",
    "SparseMask",
    "ap50",
    "average_precision",
    "mask_iou",
    "match_detections",
]
