"""
Precision-recall curves and all-points Average Precision per difficulty subset.
"""

import csv
import logging
from collections.abc import Sequence
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from ..base.exceptions import DataFormatError, EmptyCurve, IoFailure, NoGroundTruth, ValidationError
from ..base.types import PathLike
from .annotations import DetectionSet, Difficulty, GroundTruthSet
from .matching import DEFAULT_IOU_THRESHOLD, match

logger = logging.getLogger(__name__)


class SubsetMode(str, Enum):
    CUMULATIVE = "cumulative"  # hard includes medium includes easy
    DISJOINT = "disjoint"


def subset_difficulties(subset: Difficulty, mode: SubsetMode) -> frozenset[Difficulty]:
    if mode is SubsetMode.DISJOINT:
        return frozenset({subset})
    order = list(Difficulty)
    return frozenset(order[: order.index(subset) + 1])


@dataclass(frozen=True)
class PRCurve:
    """(recall, precision) after each detection in score order."""

    points: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        previous = 0.0
        for recall, precision in self.points:
            if not (0.0 <= recall <= 1.0 and 0.0 <= precision <= 1.0):
                raise ValidationError(f"PR point ({recall}, {precision}) outside [0, 1]")
            if recall < previous:
                raise ValidationError("Recall must be non-decreasing along the curve")
            previous = recall

    def __len__(self) -> int:
        return len(self.points)

    @property
    def recall(self) -> np.ndarray:
        return np.array([r for r, _ in self.points], dtype=np.float64)

    @property
    def precision(self) -> np.ndarray:
        return np.array([p for _, p in self.points], dtype=np.float64)


@dataclass(frozen=True)
class APResult:
    """AP per subset; ``None`` where the subset has no ground truth."""

    easy: float | None
    medium: float | None
    hard: float | None

    def get(self, subset: Difficulty) -> float | None:
        return getattr(self, subset.value)  # type: ignore[no-any-return]

    def format_row(self) -> str:
        return " ".join("-" if v is None else f"{v:.3f}" for v in (self.easy, self.medium, self.hard))


# Published WIDER FACE validation figures of the deployed detector; shown next
# to computed results, never computed here.
REFERENCE_AP = APResult(easy=0.972, medium=0.965, hard=0.925)


def pr_curve(flags: Sequence[bool] | np.ndarray, num_gt: int) -> PRCurve:
    """
    Cumulative precision/recall from TP flags in score order.

    Raises:
        NoGroundTruth: If ``num_gt`` is zero
    """
    if num_gt <= 0:
        raise NoGroundTruth("Precision-recall needs at least one ground-truth box")
    tp = np.asarray(flags, dtype=bool)
    tp_cum = np.cumsum(tp)
    fp_cum = np.cumsum(~tp)
    recall = tp_cum / float(num_gt)
    precision = tp_cum / np.maximum(tp_cum + fp_cum, np.finfo(np.float64).eps)
    return PRCurve(tuple(zip(recall.tolist(), precision.tolist(), strict=True)))


def average_precision(curve: PRCurve) -> float:
    """
    Area under the monotone precision envelope, integrated at recall steps.

    Raises:
        EmptyCurve: If the curve has no points
    """
    if not curve.points:
        raise EmptyCurve("Average precision of an empty curve")
    mrec = np.concatenate(([0.0], curve.recall, [1.0]))
    mpre = np.concatenate(([0.0], curve.precision, [0.0]))
    # envelope: running max from the right
    mpre = np.maximum.accumulate(mpre[::-1])[::-1]
    i = np.where(mrec[1:] != mrec[:-1])[0]
    return float(np.sum((mrec[i + 1] - mrec[i]) * mpre[i + 1]))


def brute_force_ap(scores: Sequence[float], flags: Sequence[bool], num_gt: int) -> float:
    """
    Reference AP: for every distinct score threshold recount precision and
    recall from scratch, then integrate the envelope over the sorted points.
    """
    if num_gt <= 0:
        raise NoGroundTruth("Precision-recall needs at least one ground-truth box")
    if len(scores) != len(flags):
        raise ValidationError("scores and flags must have the same length")
    points: list[tuple[float, float]] = []
    for threshold in sorted(set(scores), reverse=True):
        kept = [f for s, f in zip(scores, flags, strict=True) if s >= threshold]
        tp = sum(1 for f in kept if f)
        points.append((tp / num_gt, tp / len(kept)))
    if not points:
        raise EmptyCurve("Average precision of an empty curve")
    ap, previous = 0.0, 0.0
    for level in sorted({r for r, _ in points}):
        envelope = max(p for r, p in points if r >= level)
        ap += (level - previous) * envelope
        previous = level
    return ap


def evaluate_curves(
    dets: DetectionSet,
    gts: GroundTruthSet,
    iou_threshold: float = DEFAULT_IOU_THRESHOLD,
    subset_mode: SubsetMode | str = SubsetMode.CUMULATIVE,
    workers: int = 1,
) -> dict[Difficulty, PRCurve | None]:
    """One PR curve per subset; ``None`` for a subset without ground truth."""
    mode = SubsetMode(subset_mode)
    curves: dict[Difficulty, PRCurve | None] = {}
    for subset in Difficulty:
        result = match(dets, gts, iou_threshold, subset_difficulties(subset, mode), workers)
        try:
            curves[subset] = pr_curve(result.tp, result.num_gt)
        except NoGroundTruth:
            logger.info("No ground truth in the %s subset", subset.value)
            curves[subset] = None
    return curves


def evaluate(
    dets: DetectionSet,
    gts: GroundTruthSet,
    iou_threshold: float = DEFAULT_IOU_THRESHOLD,
    subset_mode: SubsetMode | str = SubsetMode.CUMULATIVE,
    workers: int = 1,
) -> APResult:
    """
    AP for the easy, medium and hard subsets.

    A subset with ground truth but no detections scores 0.0; a subset without
    ground truth is reported as ``None``.
    """
    values: dict[str, float | None] = {}
    for subset, curve in evaluate_curves(dets, gts, iou_threshold, subset_mode, workers).items():
        if curve is None:
            values[subset.value] = None
        else:
            values[subset.value] = average_precision(curve) if curve.points else 0.0
    return APResult(**values)


def export_pr_csv(curve: PRCurve, path: PathLike) -> None:
    """Write ``recall,precision`` rows with 6 decimals."""
    if not curve.points:
        raise EmptyCurve("Refusing to export an empty curve")
    try:
        with Path(path).open("w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["recall", "precision"])
            writer.writerows([f"{r:.6f}", f"{p:.6f}"] for r, p in curve.points)
    except OSError as e:
        raise IoFailure(f"Cannot write PR curve: {e}", path=str(path), cause=e) from e


def load_pr_csv(path: PathLike) -> PRCurve:
    p = str(path)
    try:
        with Path(path).open(encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as e:
        raise IoFailure(f"Cannot read PR curve: {e}", path=p, cause=e) from e
    if not rows or rows[0] != ["recall", "precision"]:
        raise DataFormatError("Expected header 'recall,precision'", path=p, line_number=1)
    points = []
    for number, row in enumerate(rows[1:], start=2):
        try:
            recall, precision = (float(v) for v in row)
        except ValueError as e:
            raise DataFormatError("Expected 'recall,precision'", path=p, line_number=number, cause=e) from e
        points.append((recall, precision))
    return PRCurve(tuple(points))
