"""
WIDER-style ground-truth and detection files.

Both formats are blocks of::

    <image id>
    <count>
    x y w h <difficulty|score>      (count lines)

with whitespace-separated decimal text and ``#`` comments.
"""

import math
from collections.abc import Callable, Iterator
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import TypeVar

from pydantic import BaseModel, ConfigDict, Field, field_validator

from ..base.exceptions import DataFormatError, IoFailure
from ..base.types import ImageID, PathLike
from ..geometry import BoundingBox

T = TypeVar("T")


class Difficulty(str, Enum):
    EASY = "easy"
    MEDIUM = "medium"
    HARD = "hard"


class GroundTruthBox(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    box: BoundingBox
    difficulty: Difficulty


class Detection(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    box: BoundingBox
    score: float = Field(ge=0.0, le=1.0)

    @field_validator("score")
    @classmethod
    def _finite(cls, value: float) -> float:
        if not math.isfinite(value):
            raise ValueError("score must be finite")
        return value


@dataclass(frozen=True)
class GroundTruthSet:
    images: dict[ImageID, tuple[GroundTruthBox, ...]] = field(default_factory=dict)

    def __len__(self) -> int:
        return sum(len(boxes) for boxes in self.images.values())

    def boxes(self, image_id: ImageID) -> tuple[GroundTruthBox, ...]:
        return self.images.get(image_id, ())

    def count(self, allowed: frozenset[Difficulty]) -> int:
        return sum(1 for boxes in self.images.values() for gt in boxes if gt.difficulty in allowed)


@dataclass(frozen=True)
class DetectionSet:
    images: dict[ImageID, tuple[Detection, ...]] = field(default_factory=dict)

    def __len__(self) -> int:
        return sum(len(dets) for dets in self.images.values())

    def flat(self) -> Iterator[tuple[ImageID, Detection]]:
        """Every detection with its image id, in input order."""
        for image_id, dets in self.images.items():
            for det in dets:
                yield image_id, det


def _content_lines(text: str) -> Iterator[tuple[int, str]]:
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield number, line


def _parse_blocks(
    text: str, path: str | None, make: Callable[[BoundingBox, str], T]
) -> dict[ImageID, tuple[T, ...]]:
    images: dict[ImageID, tuple[T, ...]] = {}
    lines = _content_lines(text)
    number = 0
    for number, image_id in lines:
        if image_id in images:
            raise DataFormatError(f"duplicate image id {image_id!r}", path=path, line_number=number)
        try:
            number, count_line = next(lines)
        except StopIteration:
            raise DataFormatError(
                f"missing box count for image {image_id!r}", path=path, line_number=number
            ) from None
        try:
            count = int(count_line)
            if count < 0:
                raise ValueError(f"negative box count {count}")
        except ValueError as e:
            raise DataFormatError(str(e), path=path, line_number=number, cause=e) from e
        items: list[T] = []
        for _ in range(count):
            try:
                number, row = next(lines)
            except StopIteration:
                raise DataFormatError(
                    f"image {image_id!r} declares {count} boxes, found {len(items)}",
                    path=path,
                    line_number=number,
                ) from None
            parts = row.split()
            try:
                if len(parts) != 5:
                    raise ValueError(f"expected 'x y w h <value>', got {len(parts)} fields")
                x, y, w, h = (float(p) for p in parts[:4])
                items.append(make(BoundingBox(x=x, y=y, w=w, h=h), parts[4]))
            except ValueError as e:  # pydantic's ValidationError is a ValueError
                raise DataFormatError(str(e), path=path, line_number=number, cause=e) from e
        images[image_id] = tuple(items)
    return images


def parse_ground_truth(text: str, path: str | None = None) -> GroundTruthSet:
    """
    Raises:
        DataFormatError: With the line number of the first bad line
    """
    return GroundTruthSet(
        _parse_blocks(
            text, path, lambda box, tag: GroundTruthBox(box=box, difficulty=Difficulty(tag))
        )
    )


def parse_detections(text: str, path: str | None = None) -> DetectionSet:
    return DetectionSet(
        _parse_blocks(text, path, lambda box, tag: Detection(box=box, score=float(tag)))
    )


def _read(path: PathLike) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise IoFailure(f"Cannot read annotation file: {e}", path=str(path), cause=e) from e


def load_ground_truth(path: PathLike) -> GroundTruthSet:
    return parse_ground_truth(_read(path), path=str(path))


def load_detections(path: PathLike) -> DetectionSet:
    return parse_detections(_read(path), path=str(path))
