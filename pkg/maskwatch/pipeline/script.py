"""
Frame scripts: scripted camera input for desk-scale pipeline runs.

Line format::

    # comment
    FRAME <id> <timestamp> <w> <h>
    FACE <x> <y> <w> <h> <10 landmark reals> <masked|unmasked> <true_id|-> <f1,f2,...>

Landmarks are ``left_eye right_eye nose mouth_left mouth_right`` as x y pairs.
"""

import math
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path

from pydantic import BaseModel, ConfigDict, Field, field_validator

from ..base.exceptions import IoFailure, ScriptParseError
from ..base.types import FrameID, PathLike, PersonID, Seconds
from ..geometry import BoundingBox, Landmarks5

FACE_TOKENS = 18


class MaskLabel(str, Enum):
    MASKED = "masked"
    UNMASKED = "unmasked"


class FaceObservation(BaseModel):
    """
    One scripted face. ``mask_label`` and ``feature`` stand in for the mask
    classifier and the recognizer; ``true_id`` is scoring metadata only.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    box: BoundingBox
    landmarks: Landmarks5
    mask_label: MaskLabel
    feature: tuple[float, ...] = Field(min_length=1)
    true_id: PersonID | None = None

    @field_validator("feature")
    @classmethod
    def _nonzero(cls, value: tuple[float, ...]) -> tuple[float, ...]:
        if not all(math.isfinite(v) for v in value) or not any(v != 0.0 for v in value):
            raise ValueError("feature must be finite and nonzero")
        return value


class Frame(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    frame_id: FrameID
    timestamp_s: Seconds
    width: float = Field(gt=0)
    height: float = Field(gt=0)
    faces: tuple[FaceObservation, ...] = ()

    @field_validator("timestamp_s")
    @classmethod
    def _representable(cls, value: Seconds) -> Seconds:
        if not math.isfinite(value):
            raise ValueError("timestamp must be finite")
        try:
            datetime.fromtimestamp(value, tz=timezone.utc)
        except (OverflowError, OSError, ValueError) as e:
            raise ValueError(f"timestamp {value:g} is out of range") from e
        return value


def _parse_face(tokens: list[str]) -> FaceObservation:
    if len(tokens) != FACE_TOKENS:
        raise ValueError(f"FACE needs {FACE_TOKENS - 1} fields, got {len(tokens) - 1}")
    x, y, w, h = (float(t) for t in tokens[1:5])
    landmarks = Landmarks5.from_flat([float(t) for t in tokens[5:15]])
    true_id = None if tokens[16] == "-" else tokens[16]
    return FaceObservation(
        box=BoundingBox(x=x, y=y, w=w, h=h),
        landmarks=landmarks,
        mask_label=MaskLabel(tokens[15]),
        feature=tuple(float(v) for v in tokens[17].split(",")),
        true_id=true_id,
    )


def parse_script(text: str, path: str | None = None) -> list[Frame]:
    """
    Parse a frame script.

    Raises:
        ScriptParseError: With the 1-based line number of the first bad line
    """
    frames: list[Frame] = []
    header: tuple[int, dict[str, float | int]] | None = None
    faces: list[FaceObservation] = []
    seen: set[int] = set()

    def flush() -> None:
        if header is not None:
            line_no, fields = header
            try:
                frames.append(Frame(faces=tuple(faces), **fields))  # type: ignore[arg-type]
            except ValueError as e:
                raise ScriptParseError("Invalid FRAME values", path=path, line_number=line_no, cause=e) from e

    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        keyword = tokens[0]
        try:
            if keyword == "FRAME":
                if len(tokens) != 5:
                    raise ValueError(f"FRAME needs 4 fields, got {len(tokens) - 1}")
                frame_id = int(tokens[1])
                if frame_id in seen:
                    raise ValueError(f"duplicate frame id {frame_id}")
                flush()
                seen.add(frame_id)
                header = (
                    number,
                    {
                        "frame_id": frame_id,
                        "timestamp_s": float(tokens[2]),
                        "width": float(tokens[3]),
                        "height": float(tokens[4]),
                    },
                )
                faces = []
            elif keyword == "FACE":
                if header is None:
                    raise ValueError("FACE before any FRAME")
                faces.append(_parse_face(tokens))
            else:
                raise ValueError(f"unknown keyword {keyword!r}")
        except ScriptParseError:
            raise
        except Exception as e:  # pydantic, float() and enum errors alike
            raise ScriptParseError(str(e), path=path, line_number=number, cause=e) from e
    flush()
    return frames


def load_script(path: PathLike) -> list[Frame]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise IoFailure(f"Cannot read frame script: {e}", path=str(path), cause=e) from e
    return parse_script(text, path=str(path))


def format_face(face: FaceObservation) -> str:
    lm = face.landmarks
    points = (lm.left_eye, lm.right_eye, lm.nose, lm.mouth_left, lm.mouth_right)
    fields = [
        "FACE",
        *(f"{v:g}" for v in (face.box.x, face.box.y, face.box.w, face.box.h)),
        *(f"{c:g}" for p in points for c in (p.x, p.y)),
        face.mask_label.value,
        face.true_id or "-",
        ",".join(f"{v:.17g}" for v in face.feature),
    ]
    return " ".join(fields)


def format_script(frames: list[Frame]) -> str:
    lines: list[str] = []
    for frame in frames:
        lines.append(
            f"FRAME {frame.frame_id} {frame.timestamp_s:.17g} {frame.width:g} {frame.height:g}"
        )
        lines.extend(format_face(face) for face in frame.faces)
    return "\n".join(lines) + ("\n" if lines else "")
