"""
Per-frame detection, mask check, identification and alerting.

Per face: detect, clamp/crop, frontality gate, mask check, identify,
notify. Detector, mask classifier and recognizer come from a
:class:`~maskwatch.pipeline.registry.ModelRegistry`; the script-oracle
implementations read the labels and features carried by scripted frames.
"""

import logging
from collections.abc import Callable
from typing import Protocol

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from ..base.clock import Clock, SystemClock
from ..base.exceptions import (
    DegenerateLandmarks,
    DimensionMismatch,
    EmptyIntersection,
    ZeroVector,
)
from ..base.types import Degrees, FaceIndex, PathLike, Seconds, Vector
from ..gallery import DEFAULT_THRESHOLD, Gallery, Match, identify, normalize
from ..geometry import DEFAULT_FRONTAL_LIMIT, BoundingBox, crop_roi, estimate_pose, is_frontal
from ..notify import Notifier
from .events import EventKind, PipelineEvent, write_event_log
from .registry import ModelRegistry, default_registry, get_model
from .script import FaceObservation, Frame, MaskLabel, load_script
from .timing import TimingAccumulator, TimingReport, write_report

logger = logging.getLogger(__name__)

DETECTOR_KEY = "detector"
MASK_CLASSIFIER_KEY = "mask_classifier"
RECOGNIZER_KEY = "recognizer"

# errors that abort a single face instead of the run
_FACE_ERRORS = (DimensionMismatch, EmptyIntersection, DegenerateLandmarks, ZeroVector)


class FaceDetector(Protocol):
    def detect(self, frame: Frame) -> list[FaceObservation]: ...


class MaskClassifier(Protocol):
    def is_masked(self, face: FaceObservation, roi: BoundingBox) -> bool: ...


class FaceEmbedder(Protocol):
    def embed(self, face: FaceObservation, roi: BoundingBox) -> Vector: ...


class ScriptDetector:
    """Returns the faces listed in the frame script, in order."""

    def detect(self, frame: Frame) -> list[FaceObservation]:
        return list(frame.faces)


class ScriptMaskClassifier:
    def is_masked(self, face: FaceObservation, roi: BoundingBox) -> bool:
        return face.mask_label is MaskLabel.MASKED


class ScriptEmbedder:
    """Returns the precomputed raw feature of the face."""

    def embed(self, face: FaceObservation, roi: BoundingBox) -> Vector:
        return np.asarray(face.feature, dtype=np.float64)


def register_oracle_models(registry: ModelRegistry) -> ModelRegistry:
    """Register the script-oracle detector, mask classifier and recognizer."""
    for key, loader in (
        (DETECTOR_KEY, ScriptDetector),
        (MASK_CLASSIFIER_KEY, ScriptMaskClassifier),
        (RECOGNIZER_KEY, ScriptEmbedder),
    ):
        registry.register_if_absent(key, loader)
    return registry


class PipelineConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    threshold: float = Field(default=DEFAULT_THRESHOLD, ge=-1.0, le=1.0)
    frontal_limit_deg: Degrees = Field(default=DEFAULT_FRONTAL_LIMIT, gt=0.0)
    roi_margin: float = Field(default=0.0, ge=0.0)


class Pipeline:
    """
    Sequential frame processor.

    One instance handles frames strictly in order; several instances may
    share a registry and a gallery.
    """

    def __init__(
        self,
        gallery: Gallery,
        notifier: Notifier,
        config: PipelineConfig | None = None,
        registry: ModelRegistry | None = None,
        clock: Clock | None = None,
    ) -> None:
        self.gallery = gallery
        self.notifier = notifier
        self.config = config or PipelineConfig()
        self.registry = register_oracle_models(
            registry if registry is not None else default_registry()
        )
        self.clock: Clock = clock or SystemClock()
        self.timing = TimingAccumulator()

    @property
    def detector(self) -> FaceDetector:
        return get_model(self.registry, DETECTOR_KEY)  # type: ignore[no-any-return]

    @property
    def mask_classifier(self) -> MaskClassifier:
        return get_model(self.registry, MASK_CLASSIFIER_KEY)  # type: ignore[no-any-return]

    @property
    def recognizer(self) -> FaceEmbedder:
        return get_model(self.registry, RECOGNIZER_KEY)  # type: ignore[no-any-return]

    def _since(self, start: Seconds) -> Seconds:
        return max(0.0, self.clock.monotonic() - start)

    def process_frame(self, frame: Frame) -> list[PipelineEvent]:
        start = self.clock.monotonic()
        faces = self.detector.detect(frame)
        detect_share = self._since(start) / len(faces) if faces else 0.0

        events: list[PipelineEvent] = []
        for index, face in enumerate(faces):
            events.extend(self._process_face(frame, index, face, detect_share))
        return events

    def _process_face(
        self, frame: Frame, index: FaceIndex, face: FaceObservation, detect_share: Seconds
    ) -> list[PipelineEvent]:
        events: list[PipelineEvent] = []

        def emit(kind: EventKind, seconds: Seconds, **fields: object) -> PipelineEvent:
            event = PipelineEvent(
                kind=kind,
                frame_id=frame.frame_id,
                face_index=index,
                stage_seconds=seconds,
                **fields,  # type: ignore[arg-type]
            )
            events.append(event)
            return event

        def fail(error: Exception, seconds: Seconds) -> list[PipelineEvent]:
            logger.error("Frame %s face %d aborted: %s", frame.frame_id, index, error)
            emit(EventKind.FACE_ERROR, seconds)
            return events

        start = self.clock.monotonic()
        try:
            roi = crop_roi(face.box, frame.width, frame.height, self.config.roi_margin)
        except _FACE_ERRORS as e:
            emit(EventKind.FACE_DETECTED, detect_share + self._since(start))
            return fail(e, 0.0)
        detected = emit(EventKind.FACE_DETECTED, detect_share + self._since(start))

        start = self.clock.monotonic()
        try:
            frontal = is_frontal(estimate_pose(face.landmarks), self.config.frontal_limit_deg)
        except _FACE_ERRORS as e:
            return fail(e, self._since(start))
        if not frontal:
            emit(EventKind.NON_FRONTAL_SKIPPED, self._since(start))
            logger.debug("Frame %s face %d: non-frontal, skipped", frame.frame_id, index)
            return events

        masked = self.mask_classifier.is_masked(face, roi)
        check = emit(EventKind.MASK_OK if masked else EventKind.NO_MASK, self._since(start))
        stage = "detect_predict_mask" if masked else "detect_predict_nomask"
        self.timing.add(stage, detected.stage_seconds + check.stage_seconds)
        if masked:
            return events

        start = self.clock.monotonic()
        try:
            embedding = normalize(self.recognizer.embed(face, roi))
            recognized = self.clock.monotonic()
            result = identify(self.gallery, embedding, self.config.threshold)
        except _FACE_ERRORS as e:
            return fail(e, self._since(start))
        identified = self._since(recognized)
        self.timing.add("face_recognition", max(0.0, recognized - start))
        self.timing.add("person_identification", identified)
        seconds = max(0.0, recognized - start) + identified

        if isinstance(result, Match):
            person_id: str | None = result.person_id
            emit(EventKind.IDENTIFIED, seconds, person_id=person_id, score=result.score)
        else:
            person_id = None
            emit(EventKind.UNKNOWN_PERSON, seconds, score=result.score)

        start = self.clock.monotonic()
        dispatch = self.notifier.notify(person_id, frame.frame_id, frame.timestamp_s)
        emit(EventKind.NOTIFIED, self._since(start), person_id=person_id, delivered=dispatch.ok)
        if not dispatch.ok:
            logger.warning(
                "Frame %s face %d: alert not delivered (%s)", frame.frame_id, index, dispatch.reason
            )
        return events

    def run(self, frames: list[Frame]) -> tuple[list[PipelineEvent], TimingReport]:
        events: list[PipelineEvent] = []
        for frame in frames:
            events.extend(self.process_frame(frame))
        logger.info("Processed %d frames, %d events", len(frames), len(events))
        return events, self.timing.report()


def process_frame(
    frame: Frame,
    gallery: Gallery,
    threshold: float,
    notifier: Notifier,
    clock: Clock | None = None,
) -> list[PipelineEvent]:
    """
    One-shot form of :meth:`Pipeline.process_frame`.

    Models come from the process-wide registry, so repeated calls load each
    model once.
    """
    return Pipeline(gallery, notifier, PipelineConfig(threshold=threshold), clock=clock).process_frame(
        frame
    )


def run_script(
    script_path: PathLike,
    gallery: Gallery,
    notifier: Notifier,
    config: PipelineConfig | None = None,
    *,
    clock: Clock | None = None,
    registry: ModelRegistry | None = None,
    events_out: PathLike | None = None,
    timing_out: PathLike | None = None,
    on_event: Callable[[PipelineEvent], None] | None = None,
) -> tuple[list[PipelineEvent], TimingReport]:
    """
    Parse ``script_path`` and process its frames in order.

    Raises:
        ScriptParseError: With the line number of the first bad line
        IoFailure: If the script cannot be read or an output cannot be written
    """
    frames = load_script(script_path)
    pipeline = Pipeline(gallery, notifier, config, registry=registry, clock=clock)
    events, report = pipeline.run(frames)
    if on_event is not None:
        for event in events:
            on_event(event)
    if events_out is not None:
        write_event_log(events, events_out)
        logger.debug("Event log written to %s", events_out)
    if timing_out is not None:
        write_report(report, timing_out)
    return events, report


def identification_accuracy(frames: list[Frame], events: list[PipelineEvent]) -> float | None:
    """
    Fraction of identification events whose outcome agrees with ``true_id``
    (an UnknownPerson event is correct when the face has no ``true_id``).
    Returns ``None`` when there are no identification events.
    """
    truth = {
        (frame.frame_id, index): face.true_id
        for frame in frames
        for index, face in enumerate(frame.faces)
    }
    outcomes = [
        e
        for e in events
        if e.kind in (EventKind.IDENTIFIED, EventKind.UNKNOWN_PERSON)
    ]
    if not outcomes:
        return None
    correct = sum(1 for e in outcomes if truth.get((e.frame_id, e.face_index)) == e.person_id)
    return correct / len(outcomes)
