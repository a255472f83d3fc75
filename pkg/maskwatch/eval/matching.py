"""
Greedy IoU matching of detections to ground truth.

Detections are taken in descending score order (ties by input order); each
claims the unmatched ground-truth box of highest IoU in its image, provided
the IoU reaches the threshold. Ground truth outside the active difficulty
subset does not exist for the pass, so detections on it are false positives.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..base.exceptions import ValidationError
from ..base.types import BoolArray, ImageID, Vector
from ..geometry import iou
from .annotations import Detection, DetectionSet, Difficulty, GroundTruthBox, GroundTruthSet

logger = logging.getLogger(__name__)

ALL_DIFFICULTIES = frozenset(Difficulty)
DEFAULT_IOU_THRESHOLD = 0.5


@dataclass(frozen=True)
class MatchResult:
    """
    Matching outcome in global score order.

    ``tp[i]`` tells whether the i-th highest-scoring detection is a true
    positive; ``gt_matched`` maps each image to per-box flags (boxes outside
    the active subset are always False).
    """

    scores: Vector
    tp: BoolArray
    gt_matched: dict[ImageID, tuple[bool, ...]]
    num_gt: int

    @property
    def fp(self) -> BoolArray:
        return ~self.tp


def _match_image(
    dets: list[tuple[int, Detection]],
    gts: tuple[GroundTruthBox, ...],
    allowed: frozenset[Difficulty],
    iou_threshold: float,
) -> tuple[list[tuple[int, float, bool]], tuple[bool, ...]]:
    active = [gt.difficulty in allowed for gt in gts]
    matched = [False] * len(gts)
    outcome: list[tuple[int, float, bool]] = []
    for order, det in sorted(dets, key=lambda item: (-item[1].score, item[0])):
        best, best_iou = -1, -1.0
        for j, gt in enumerate(gts):
            if not active[j] or matched[j]:
                continue
            overlap = iou(det.box, gt.box)
            # strict ">" keeps the earliest box on IoU ties
            if overlap >= iou_threshold and overlap > best_iou:
                best, best_iou = j, overlap
        if best >= 0:
            matched[best] = True
        outcome.append((order, det.score, best >= 0))
    return outcome, tuple(matched)


def match(
    dets: DetectionSet,
    gts: GroundTruthSet,
    iou_threshold: float = DEFAULT_IOU_THRESHOLD,
    allowed: frozenset[Difficulty] = ALL_DIFFICULTIES,
    workers: int = 1,
) -> MatchResult:
    """
    Greedy per-image matching, merged into one score-ordered flag list.

    Images are independent, so ``workers > 1`` matches them on a thread
    pool; the merge is by (descending score, input order), so the result
    does not depend on ``workers``.

    Ground truth outside ``allowed`` is invisible to the pass: a detection
    that only overlaps such a box counts as a false positive instead of
    being ignored, so harder-subset boxes lower easy-subset precision.
    """
    if not 0.0 < iou_threshold < 1.0:
        raise ValidationError(f"iou_threshold must lie in (0, 1), got {iou_threshold}")
    if workers < 1:
        raise ValidationError(f"workers must be >= 1, got {workers}")

    per_image: dict[ImageID, list[tuple[int, Detection]]] = {}
    for order, (image_id, det) in enumerate(dets.flat()):
        per_image.setdefault(image_id, []).append((order, det))

    image_ids = sorted(set(per_image) | set(gts.images))

    def run(image_id: ImageID) -> tuple[list[tuple[int, float, bool]], tuple[bool, ...]]:
        return _match_image(per_image.get(image_id, []), gts.boxes(image_id), allowed, iou_threshold)

    if workers == 1:
        results = [run(image_id) for image_id in image_ids]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, image_ids))

    merged = sorted(
        (item for outcome, _ in results for item in outcome), key=lambda item: (-item[1], item[0])
    )
    gt_matched = {
        image_id: flags
        for image_id, (_, flags) in zip(image_ids, results, strict=True)
        if image_id in gts.images
    }
    num_gt = gts.count(allowed)
    logger.debug(
        "Matched %d detections against %d ground-truth boxes over %d images",
        len(merged),
        num_gt,
        len(image_ids),
    )
    return MatchResult(
        scores=np.array([score for _, score, _ in merged], dtype=np.float64),
        tp=np.array([hit for _, _, hit in merged], dtype=bool),
        gt_matched=gt_matched,
        num_gt=num_gt,
    )
