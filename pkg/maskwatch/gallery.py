"""
Enrolled-identity gallery with cosine-similarity identification.

A :class:`Gallery` is an append-only, persistent value: :func:`enroll`
returns a new gallery and never mutates the one it was given, so readers can
share a gallery across threads while a writer builds the next version.
"""

import math
from collections.abc import Iterator, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .base.exceptions import (
    DimensionMismatch,
    FormatError,
    IoFailure,
    ValidationError,
    ZeroVector,
)
from .base.types import Matrix, PathLike, PersonID, Vector

DEFAULT_DIM = 512  # current recognizer; 128 for the older one
DEFAULT_THRESHOLD = 0.5
UNIT_NORM_TOL = 1e-6
HEADER_PREFIX = "GALLERY v1 dim="


@dataclass(frozen=True)
class Embedding:
    """Unit-norm feature vector."""

    values: Vector

    def __post_init__(self) -> None:
        if self.values.ndim != 1 or self.values.size == 0:
            raise DimensionMismatch("Embedding must be a non-empty 1-D vector")
        norm = float(np.linalg.norm(self.values))
        if not math.isfinite(norm) or abs(norm - 1.0) > UNIT_NORM_TOL:
            raise ValidationError("Embedding must have unit L2 norm")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Embedding):
            return NotImplemented
        return bool(np.array_equal(self.values, other.values))

    __hash__ = None  # type: ignore[assignment]

    @property
    def dim(self) -> int:
        return int(self.values.size)


@dataclass(frozen=True)
class GalleryEntry:
    person_id: PersonID
    embedding: Embedding


@dataclass(frozen=True)
class Match:
    person_id: PersonID
    score: float


@dataclass(frozen=True)
class Unknown:
    """No gallery entry reached the threshold; ``score`` is the best similarity seen."""

    score: float | None = None


IdentifyResult = Match | Unknown


@dataclass(frozen=True)
class Gallery:
    dim: int = DEFAULT_DIM
    entries: tuple[GalleryEntry, ...] = ()
    _matrix: Matrix = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise ValidationError(f"Gallery dim must be positive, got {self.dim}")
        for entry in self.entries:
            if entry.embedding.dim != self.dim:
                raise DimensionMismatch(
                    f"Entry {entry.person_id!r} has dim {entry.embedding.dim}",
                    expected=self.dim,
                    actual=entry.embedding.dim,
                )
        matrix = (
            np.vstack([e.embedding.values for e in self.entries])
            if self.entries
            else np.zeros((0, self.dim))
        )
        object.__setattr__(self, "_matrix", matrix)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[GalleryEntry]:
        return iter(self.entries)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Gallery):
            return NotImplemented
        return (
            self.dim == other.dim
            and [e.person_id for e in self.entries] == [e.person_id for e in other.entries]
            and bool(np.array_equal(self._matrix, other._matrix))
        )

    @property
    def matrix(self) -> Matrix:
        """(len, dim) stacked embeddings in enrollment order (read-only view)."""
        view = self._matrix.view()
        view.flags.writeable = False
        return view

    def persons(self) -> list[PersonID]:
        """Distinct person ids in first-enrollment order."""
        return list(dict.fromkeys(e.person_id for e in self.entries))


def normalize(raw: Sequence[float] | Vector) -> Embedding:
    """Scale ``raw`` to unit length."""
    values = np.asarray(raw, dtype=np.float64)
    norm = float(np.linalg.norm(values))
    if norm == 0.0 or not math.isfinite(norm):
        raise ZeroVector("Cannot normalize a zero (or non-finite) vector")
    return Embedding(values / norm)


def _check_person_id(person_id: PersonID) -> None:
    if not person_id or any(c in person_id for c in "\t\r\n"):
        raise ValidationError(f"Invalid person id {person_id!r}: must be nonempty, no tabs/newlines")


def enroll(g: Gallery, person_id: PersonID, raw: Sequence[float] | Vector) -> Gallery:
    """
    Return a new gallery with ``person_id`` appended.

    Several entries per person are allowed; identification takes the best.

    Raises:
        DimensionMismatch: If ``raw`` does not have ``g.dim`` values
        ZeroVector: If ``raw`` is the zero vector
    """
    _check_person_id(person_id)
    values = np.asarray(raw, dtype=np.float64)
    if values.ndim != 1 or values.size != g.dim:
        raise DimensionMismatch(
            f"Vector of dim {values.size} cannot enter a dim-{g.dim} gallery",
            expected=g.dim,
            actual=int(values.size),
        )
    entry = GalleryEntry(person_id, normalize(values))
    return Gallery(dim=g.dim, entries=(*g.entries, entry))


def cosine_similarity(a: Embedding, b: Embedding) -> float:
    if a.dim != b.dim:
        raise DimensionMismatch(
            f"Cannot compare dims {a.dim} and {b.dim}", expected=a.dim, actual=b.dim
        )
    return float(np.clip(np.dot(a.values, b.values), -1.0, 1.0))


def identify(g: Gallery, probe: Embedding, threshold: float = DEFAULT_THRESHOLD) -> IdentifyResult:
    """
    Linear-scan identification.

    Returns the entry with maximum cosine similarity (earliest enrollment wins
    ties) as a :class:`Match` when its score reaches ``threshold``, otherwise
    :class:`Unknown`.
    """
    if not -1.0 <= threshold <= 1.0:
        raise ValidationError(f"threshold must lie in [-1, 1], got {threshold}")
    if probe.dim != g.dim:
        raise DimensionMismatch(
            f"Probe dim {probe.dim} does not match gallery dim {g.dim}",
            expected=g.dim,
            actual=probe.dim,
        )
    if not g.entries:
        return Unknown()
    scores = np.clip(g.matrix @ probe.values, -1.0, 1.0)
    best = int(np.argmax(scores))  # first occurrence on ties
    score = float(scores[best])
    if score >= threshold:
        return Match(g.entries[best].person_id, score)
    return Unknown(score)


def save(g: Gallery, path: PathLike) -> None:
    """Write ``GALLERY v1 dim=<D>`` then ``<person_id>\\t<v1>,...,<vD>`` per entry."""
    lines = [f"{HEADER_PREFIX}{g.dim}"]
    for entry in g.entries:
        lines.append(entry.person_id + "\t" + ",".join(f"{v:.17g}" for v in entry.embedding.values))
    try:
        with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as e:
        raise IoFailure(f"Cannot write gallery: {e}", path=str(path), cause=e) from e


def load(path: PathLike) -> Gallery:
    """
    Read a gallery file.

    Raises:
        IoFailure: If the file cannot be read
        FormatError: On a bad header, wrong row length or non-unit vector
    """
    p = str(path)
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise IoFailure(f"Cannot read gallery: {e}", path=p, cause=e) from e
    lines = text.split("\n")
    header = lines[0].rstrip("\r")
    if not header.startswith(HEADER_PREFIX):
        raise FormatError(f"Expected header '{HEADER_PREFIX}<D>'", path=p, line_number=1)
    try:
        dim = int(header[len(HEADER_PREFIX) :])
        if dim < 1:
            raise ValueError(dim)
    except ValueError as e:
        raise FormatError("Bad dimension in header", path=p, line_number=1, cause=e) from e

    entries: list[GalleryEntry] = []
    for number, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        person_id, sep, values_str = line.partition("\t")
        if not sep or not person_id:
            raise FormatError("Expected '<person_id>\\t<values>'", path=p, line_number=number)
        try:
            values = np.array([float(v) for v in values_str.split(",")], dtype=np.float64)
        except ValueError as e:
            raise FormatError("Non-numeric value", path=p, line_number=number, cause=e) from e
        if values.size != dim:
            raise FormatError(
                f"Declared dim {dim} but row has {values.size} values", path=p, line_number=number
            )
        try:
            entries.append(GalleryEntry(person_id, Embedding(values)))
        except ValidationError as e:
            raise FormatError("Row is not a unit vector", path=p, line_number=number, cause=e) from e
    return Gallery(dim=dim, entries=tuple(entries))


def load_vector(path: PathLike) -> Vector:
    """Read a raw feature vector: reals separated by commas and/or whitespace."""
    p = str(path)
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise IoFailure(f"Cannot read vector: {e}", path=p, cause=e) from e
    tokens = text.replace(",", " ").split()
    if not tokens:
        raise FormatError("Vector file is empty", path=p)
    try:
        return np.array([float(t) for t in tokens], dtype=np.float64)
    except ValueError as e:
        raise FormatError("Non-numeric value in vector file", path=p, cause=e) from e
