"""
Pipeline events, the tab-separated event log, and the per-face grammar check.

Per face the pipeline emits::

    FaceDetected ( NonFrontalSkipped
                 | MaskOk
                 | NoMask ( (Identified | UnknownPerson) Notified | FaceError )
                 | FaceError )
"""

from collections.abc import Iterable
from enum import Enum
from pathlib import Path

from pydantic import BaseModel, ConfigDict, Field

from ..base.exceptions import DataFormatError, InvariantViolation, IoFailure
from ..base.types import FaceIndex, FrameID, PathLike, PersonID, Seconds

FAILED_MARK = "FAILED"


class EventKind(str, Enum):
    FACE_DETECTED = "FaceDetected"
    MASK_OK = "MaskOk"
    NO_MASK = "NoMask"
    IDENTIFIED = "Identified"
    UNKNOWN_PERSON = "UnknownPerson"
    NOTIFIED = "Notified"
    NON_FRONTAL_SKIPPED = "NonFrontalSkipped"
    FACE_ERROR = "FaceError"


class PipelineEvent(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: EventKind
    frame_id: FrameID
    face_index: FaceIndex = Field(ge=0)
    person_id: PersonID | None = None
    score: float | None = None
    stage_seconds: Seconds = Field(default=0.0, ge=0.0)
    delivered: bool = True  # only meaningful for Notified


def format_event(event: PipelineEvent) -> str:
    fields = [
        str(event.frame_id),
        str(event.face_index),
        event.kind.value,
        event.person_id or "-",
        "-" if event.score is None else f"{event.score:.6f}",
        f"{event.stage_seconds:.6f}",
    ]
    if event.kind is EventKind.NOTIFIED and not event.delivered:
        fields.append(FAILED_MARK)
    return "\t".join(fields)


def format_event_log(events: Iterable[PipelineEvent]) -> str:
    return "".join(format_event(e) + "\n" for e in events)


def write_event_log(events: Iterable[PipelineEvent], path: PathLike) -> None:
    try:
        with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
            fh.write(format_event_log(events))
    except OSError as e:
        raise IoFailure(f"Cannot write event log: {e}", path=str(path), cause=e) from e


def parse_event_log(text: str, path: str | None = None) -> list[PipelineEvent]:
    events: list[PipelineEvent] = []
    for number, line in enumerate(text.splitlines(), start=1):
        if not line:
            continue
        fields = line.split("\t")
        try:
            if len(fields) not in (6, 7) or (len(fields) == 7 and fields[6] != FAILED_MARK):
                raise ValueError(f"expected 6 fields, got {len(fields)}")
            events.append(
                PipelineEvent(
                    frame_id=int(fields[0]),
                    face_index=int(fields[1]),
                    kind=EventKind(fields[2]),
                    person_id=None if fields[3] == "-" else fields[3],
                    score=None if fields[4] == "-" else float(fields[4]),
                    stage_seconds=float(fields[5]),
                    delivered=len(fields) == 6,
                )
            )
        except ValueError as e:
            raise DataFormatError(str(e), path=path, line_number=number, cause=e) from e
    return events


# state -> {kind: next state}; "done" is the only accepting state
_TRANSITIONS: dict[str, dict[EventKind, str]] = {
    "start": {EventKind.FACE_DETECTED: "detected"},
    "detected": {
        EventKind.NON_FRONTAL_SKIPPED: "done",
        EventKind.MASK_OK: "done",
        EventKind.NO_MASK: "nomask",
        EventKind.FACE_ERROR: "done",
    },
    "nomask": {
        EventKind.IDENTIFIED: "identified",
        EventKind.UNKNOWN_PERSON: "identified",
        EventKind.FACE_ERROR: "done",
    },
    "identified": {EventKind.NOTIFIED: "done"},
    "done": {},
}


def check_event_grammar(events: Iterable[PipelineEvent]) -> None:
    """
    Run the per-face automaton over an event stream.

    Events of one face must be contiguous and every face must reach an
    accepting state.

    Raises:
        InvariantViolation: On the first out-of-grammar event
    """
    current: tuple[int, int] | None = None
    state = "done"
    finished: set[tuple[int, int]] = set()
    for position, event in enumerate(events):
        key = (event.frame_id, event.face_index)
        if key != current:
            if state != "done":
                raise InvariantViolation(f"Face {current} ended in state {state!r}")
            if key in finished:
                raise InvariantViolation(f"Face {key} events are not contiguous (event {position})")
            if current is not None:
                finished.add(current)
            current, state = key, "start"
        nxt = _TRANSITIONS[state].get(event.kind)
        if nxt is None:
            raise InvariantViolation(
                f"Event {position} ({event.kind.value}) not allowed after state {state!r} for face {key}"
            )
        state = nxt
    if state != "done":
        raise InvariantViolation(f"Face {current} ended in state {state!r}")
