"""
Face-detection evaluation: greedy matching, PR curves and AP per difficulty subset.
"""

from .annotations import (
    Detection,
    DetectionSet,
    Difficulty,
    GroundTruthBox,
    GroundTruthSet,
    load_detections,
    load_ground_truth,
    parse_detections,
    parse_ground_truth,
)
from .matching import DEFAULT_IOU_THRESHOLD, MatchResult, match
from .metrics import (
    REFERENCE_AP,
    APResult,
    PRCurve,
    SubsetMode,
    average_precision,
    brute_force_ap,
    evaluate,
    evaluate_curves,
    export_pr_csv,
    load_pr_csv,
    pr_curve,
    subset_difficulties,
)

__all__ = [
    "Detection",
    "DetectionSet",
    "Difficulty",
    "GroundTruthBox",
    "GroundTruthSet",
    "load_detections",
    "load_ground_truth",
    "parse_detections",
    "parse_ground_truth",
    "DEFAULT_IOU_THRESHOLD",
    "MatchResult",
    "match",
    "REFERENCE_AP",
    "APResult",
    "PRCurve",
    "SubsetMode",
    "average_precision",
    "brute_force_ap",
    "evaluate",
    "evaluate_curves",
    "export_pr_csv",
    "load_pr_csv",
    "pr_curve",
    "subset_difficulties",
]
