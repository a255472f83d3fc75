"""
Face geometry: boxes, landmarks, IoU, ROI clamping and the frontality gate.

Boxes use ``(left, top, width, height)`` in continuous pixel units with
``area = w * h`` (no +1 pixel convention).
"""

from pydantic import BaseModel, ConfigDict, Field, model_validator

from .base.exceptions import DegenerateLandmarks, EmptyIntersection, ValidationError
from .base.types import Degrees, Pixels

DEFAULT_FRONTAL_LIMIT: Degrees = 25.0


class BoundingBox(BaseModel):
    """Axis-aligned face box in image coordinates."""

    model_config = ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)

    x: Pixels
    y: Pixels
    w: Pixels = Field(gt=0)
    h: Pixels = Field(gt=0)

    @property
    def x2(self) -> Pixels:
        return self.x + self.w

    @property
    def y2(self) -> Pixels:
        return self.y + self.h

    @property
    def area(self) -> float:
        # Extents rather than w*h so that iou(a, a) is exactly 1.
        return (self.x2 - self.x) * (self.y2 - self.y)

    @property
    def center(self) -> tuple[Pixels, Pixels]:
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)


class Point2(BaseModel):
    """A 2-D image point."""

    model_config = ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)

    x: Pixels
    y: Pixels

    def mirrored(self, frame_w: Pixels) -> "Point2":
        return Point2(x=frame_w - self.x, y=self.y)


class Landmarks5(BaseModel):
    """Five-point face landmarks (eyes, nose tip, mouth corners)."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    left_eye: Point2
    right_eye: Point2
    nose: Point2
    mouth_left: Point2
    mouth_right: Point2

    @model_validator(mode="after")
    def _eyes_ordered(self) -> "Landmarks5":
        if not self.left_eye.x < self.right_eye.x:
            raise ValueError("left_eye.x must be smaller than right_eye.x")
        return self

    @classmethod
    def from_flat(cls, values: list[float]) -> "Landmarks5":
        """Build from ten reals ``lex ley rex rey nx ny mlx mly mrx mry``."""
        if len(values) != 10:
            raise ValidationError(f"Expected 10 landmark values, got {len(values)}")
        pts = [Point2(x=values[i], y=values[i + 1]) for i in range(0, 10, 2)]
        return cls(
            left_eye=pts[0], right_eye=pts[1], nose=pts[2], mouth_left=pts[3], mouth_right=pts[4]
        )

    def mirrored(self, frame_w: Pixels) -> "Landmarks5":
        """Horizontal flip; left/right points swap so the eye ordering still holds."""
        return Landmarks5(
            left_eye=self.right_eye.mirrored(frame_w),
            right_eye=self.left_eye.mirrored(frame_w),
            nose=self.nose.mirrored(frame_w),
            mouth_left=self.mouth_right.mirrored(frame_w),
            mouth_right=self.mouth_left.mirrored(frame_w),
        )


class PoseAngles(BaseModel):
    """Approximate head pose in degrees."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    yaw_deg: Degrees = Field(ge=-90.0, le=90.0)
    pitch_deg: Degrees = Field(ge=-90.0, le=90.0)


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union of two boxes; 0.0 when they do not overlap."""
    iw = min(a.x2, b.x2) - max(a.x, b.x)
    ih = min(a.y2, b.y2) - max(a.y, b.y)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    union = a.area + b.area - inter
    return min(1.0, inter / union)


def clamp_to_frame(box: BoundingBox, frame_w: Pixels, frame_h: Pixels) -> BoundingBox:
    """
    Intersect ``box`` with the frame rectangle ``[0, frame_w] x [0, frame_h]``.

    Raises:
        ValidationError: If the frame size is not positive
        EmptyIntersection: If the box lies entirely outside the frame
    """
    if frame_w <= 0 or frame_h <= 0:
        raise ValidationError(f"Frame size must be positive, got {frame_w}x{frame_h}")
    if box.x >= 0 and box.y >= 0 and box.x2 <= frame_w and box.y2 <= frame_h:
        return box
    x1, y1 = max(box.x, 0.0), max(box.y, 0.0)
    x2, y2 = min(box.x2, frame_w), min(box.y2, frame_h)
    if x2 <= x1 or y2 <= y1:
        raise EmptyIntersection(f"Box {box} lies outside the {frame_w}x{frame_h} frame")
    return BoundingBox(x=x1, y=y1, w=x2 - x1, h=y2 - y1)


def crop_roi(
    box: BoundingBox, frame_w: Pixels, frame_h: Pixels, margin: float = 0.0
) -> BoundingBox:
    """
    Face ROI passed to recognition: the box grown by ``margin`` (relative to
    its size, split evenly on both sides) and clamped to the frame.

    ``margin=0`` gives the tight crop; positive margins reproduce the loose
    crops of older detectors.
    """
    if margin < 0:
        raise ValidationError(f"margin must be non-negative, got {margin}")
    if margin == 0:
        return clamp_to_frame(box, frame_w, frame_h)
    dw, dh = box.w * margin / 2.0, box.h * margin / 2.0
    grown = BoundingBox(x=box.x - dw, y=box.y - dh, w=box.w + 2 * dw, h=box.h + 2 * dh)
    return clamp_to_frame(grown, frame_w, frame_h)


def estimate_pose(lm: Landmarks5) -> PoseAngles:
    """
    Closed-form pose from landmark asymmetry.

    yaw is ``90 * (dL - dR) / (dL + dR)`` over the horizontal eye-to-nose
    distances; pitch is ``90 * (dU - dD) / (dU + dD)`` over the vertical
    eye-midpoint-to-nose and nose-to-mouth-midpoint distances. Both are zero
    for a symmetric face.

    Raises:
        DegenerateLandmarks: If either denominator is zero
    """
    d_left = abs(lm.nose.x - lm.left_eye.x)
    d_right = abs(lm.right_eye.x - lm.nose.x)
    eye_mid_y = (lm.left_eye.y + lm.right_eye.y) / 2.0
    mouth_mid_y = (lm.mouth_left.y + lm.mouth_right.y) / 2.0
    d_up = abs(lm.nose.y - eye_mid_y)
    d_down = abs(mouth_mid_y - lm.nose.y)

    if d_left + d_right == 0:
        raise DegenerateLandmarks("Nose and eyes share an x coordinate; yaw undefined")
    if d_up + d_down == 0:
        raise DegenerateLandmarks("Eyes, nose and mouth share a y coordinate; pitch undefined")

    yaw = 90.0 * (d_left - d_right) / (d_left + d_right)
    pitch = 90.0 * (d_up - d_down) / (d_up + d_down)
    return PoseAngles(yaw_deg=yaw, pitch_deg=pitch)


def is_frontal(pose: PoseAngles, limit_deg: Degrees = DEFAULT_FRONTAL_LIMIT) -> bool:
    """True iff both ``|yaw|`` and ``|pitch|`` are within ``limit_deg`` (inclusive)."""
    if limit_deg <= 0:
        raise ValidationError(f"limit_deg must be positive, got {limit_deg}")
    return abs(pose.yaw_deg) <= limit_deg and abs(pose.pitch_deg) <= limit_deg
