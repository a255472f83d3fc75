"""
Tests for frame scripts, events, the model registry, timing and the engine.
"""

import time
from collections import Counter
from concurrent.futures import ThreadPoolExecutor

import pydantic
import pytest

from maskwatch.base.clock import VirtualClock
from maskwatch.base.exceptions import (
    DataFormatError,
    InvariantViolation,
    LoaderFailure,
    NonPositiveTime,
    ScriptParseError,
    SinkUnavailable,
    UnknownKey,
)
from maskwatch.gallery import Gallery, enroll, load
from maskwatch.notify import FileSinkTransport, Notifier, Transport, parse_sink
from maskwatch.pipeline import (
    EventKind,
    FaceObservation,
    Frame,
    MaskLabel,
    ModelRegistry,
    Pipeline,
    PipelineConfig,
    PipelineEvent,
    TimingAccumulator,
    TimingReport,
    check_event_grammar,
    compare_reports,
    default_registry,
    format_event_log,
    format_script,
    get_model,
    identification_accuracy,
    load_report,
    parse_event_log,
    parse_report,
    parse_script,
    process_frame,
    run_script,
)
from maskwatch.pipeline.script import load_script

FRONTAL = "10 10 30 10 20 20 12 30 28 30"
PROFILE = "10 10 30 10 14 20 12 30 28 30"


def face_line(mask="unmasked", true_id="-", feature="1,0,0,0", landmarks=FRONTAL, box="0 0 40 40"):
    return f"FACE {box} {landmarks} {mask} {true_id} {feature}"


def frame_of(*faces, frame_id=1, width=640, height=480):
    text = f"FRAME {frame_id} 1700000000 {width} {height}\n" + "\n".join(faces) + "\n"
    return parse_script(text)[0]


def kinds(events):
    return [e.kind for e in events]


class RecordingTransport(Transport):
    def __init__(self):
        super().__init__()
        self.messages = []

    def _deliver(self, msg):
        self.messages.append(msg)


class OfflineTransport(Transport):
    def _deliver(self, msg):
        raise SinkUnavailable("offline")


@pytest.fixture
def pipeline(small_gallery, virtual_clock):
    return Pipeline(small_gallery, Notifier(RecordingTransport()), clock=virtual_clock)


class TestScript:
    """Test the frame script format."""

    def test_parse_frame_and_faces(self):
        frames = parse_script(
            "# comment\nFRAME 3 1700000000.5 640 480\n" + face_line("masked", "alice") + "\nFRAME 4 1700000001 640 480\n"
        )
        assert [f.frame_id for f in frames] == [3, 4]
        assert frames[0].faces[0].mask_label is MaskLabel.MASKED
        assert frames[0].faces[0].true_id == "alice"
        assert frames[1].faces == ()

    def test_empty_script(self):
        assert parse_script("") == []
        assert parse_script("# nothing\n\n") == []

    @pytest.mark.parametrize(
        "text,line",
        [
            (face_line(), 1),
            ("FRAME 1 0 640 480\nFACE 0 0 40 40\n", 2),
            ("FRAME 1 0 640 480\n" + face_line(mask="maybe"), 2),
            ("FRAME 1 0 640 480\n" + face_line(feature="0,0,0,0"), 2),
            ("FRAME 1 0 640 480\nFRAME 1 1 640 480\n", 2),
            ("FRAME 1 0 640\n", 1),
            ("FRAME 1 0 0 480\n", 1),
            ("FRAME 1 0 640 480\nBOX 1 2 3\n", 2),
            ("FRAME 1 1e12 640 480\n" + face_line(), 1),
            ("FRAME 1 nan 640 480\n", 1),
            ("FRAME 1 -inf 640 480\n", 1),
        ],
    )
    def test_parse_errors(self, text, line):
        with pytest.raises(ScriptParseError) as exc:
            parse_script(text)
        assert exc.value.line_number == line

    def test_format_round_trip(self, demo_script_path):
        frames = load_script(demo_script_path)
        assert parse_script(format_script(frames)) == frames


class TestEvents:
    """Test the event log and grammar automaton."""

    def _event(self, kind, face=0, frame=1, **kw):
        return PipelineEvent(kind=kind, frame_id=frame, face_index=face, **kw)

    def test_log_round_trip(self):
        events = [
            self._event(EventKind.FACE_DETECTED, stage_seconds=0.001),
            self._event(EventKind.NO_MASK, stage_seconds=0.002),
            self._event(EventKind.IDENTIFIED, person_id="alice", score=0.99, stage_seconds=0.003),
            self._event(EventKind.NOTIFIED, person_id="alice", delivered=False),
        ]
        text = format_event_log(events)
        assert text.splitlines()[2] == "1\t0\tIdentified\talice\t0.990000\t0.003000"
        assert text.splitlines()[3].endswith("\tFAILED")
        assert parse_event_log(text) == events

    def test_parse_bad_line(self):
        with pytest.raises(DataFormatError) as exc:
            parse_event_log("1\t0\tFaceDetected\t-\t-\t0.0\n1\t0\tBogus\t-\t-\t0.0\n")
        assert exc.value.line_number == 2

    @pytest.mark.parametrize(
        "sequence",
        [
            [EventKind.FACE_DETECTED, EventKind.MASK_OK],
            [EventKind.FACE_DETECTED, EventKind.NON_FRONTAL_SKIPPED],
            [EventKind.FACE_DETECTED, EventKind.NO_MASK, EventKind.UNKNOWN_PERSON, EventKind.NOTIFIED],
            [EventKind.FACE_DETECTED, EventKind.NO_MASK, EventKind.FACE_ERROR],
            [EventKind.FACE_DETECTED, EventKind.FACE_ERROR],
        ],
    )
    def test_grammar_accepts(self, sequence):
        check_event_grammar([self._event(k) for k in sequence])

    @pytest.mark.parametrize(
        "sequence",
        [
            [EventKind.FACE_DETECTED, EventKind.MASK_OK, EventKind.NOTIFIED],
            [EventKind.FACE_DETECTED, EventKind.NO_MASK],
            [EventKind.FACE_DETECTED, EventKind.NO_MASK, EventKind.NOTIFIED],
            [EventKind.MASK_OK],
            [EventKind.FACE_DETECTED, EventKind.NO_MASK, EventKind.IDENTIFIED],
        ],
    )
    def test_grammar_rejects(self, sequence):
        with pytest.raises(InvariantViolation):
            check_event_grammar([self._event(k) for k in sequence])

    def test_grammar_rejects_interleaving(self):
        events = [
            self._event(EventKind.FACE_DETECTED, face=0),
            self._event(EventKind.MASK_OK, face=0),
            self._event(EventKind.FACE_DETECTED, face=1),
            self._event(EventKind.MASK_OK, face=1),
            self._event(EventKind.FACE_DETECTED, face=0),
            self._event(EventKind.MASK_OK, face=0),
        ]
        with pytest.raises(InvariantViolation):
            check_event_grammar(events)


class TestRegistry:
    """Test load-once model access."""

    def test_same_handle(self):
        reg = ModelRegistry()
        reg.register("detector", object)
        first = get_model(reg, "detector")
        assert get_model(reg, "detector") is first
        assert reg.load_count("detector") == 1

    def test_unknown_key(self):
        with pytest.raises(UnknownKey):
            get_model(ModelRegistry(), "nope")

    def test_concurrent_first_access(self):
        reg = ModelRegistry()
        def slow_loader():
            time.sleep(0.05)
            return object()

        reg.register("recognizer", slow_loader)

        def fetch(_):
            return get_model(reg, "recognizer")

        with ThreadPoolExecutor(max_workers=16) as pool:
            handles = list(pool.map(fetch, range(1000)))
        assert reg.load_count("recognizer") == 1
        assert all(h is handles[0] for h in handles)

    def test_loader_failure_cached(self):
        calls = []

        def broken():
            calls.append(1)
            raise RuntimeError("weights missing")

        reg = ModelRegistry()
        reg.register("mask_classifier", broken)
        for _ in range(3):
            with pytest.raises(LoaderFailure):
                get_model(reg, "mask_classifier")
        assert len(calls) == 1

    def test_duplicate_registration(self):
        reg = ModelRegistry()
        reg.register("detector", object)
        with pytest.raises(ValueError):
            reg.register("detector", object)
        reg.register("detector", dict, replace=True)
        assert get_model(reg, "detector") == {}

    def test_register_if_absent_keeps_first_loader(self):
        reg = ModelRegistry()
        assert reg.register_if_absent("detector", list)
        assert not reg.register_if_absent("detector", dict)
        assert get_model(reg, "detector") == []

    def test_concurrent_pipelines_share_default_registry(self, small_gallery):
        def build(_):
            return Pipeline(small_gallery, Notifier(RecordingTransport())).registry

        with ThreadPoolExecutor(max_workers=8) as pool:
            registries = list(pool.map(build, range(64)))
        assert all(r is default_registry() for r in registries)


class TestTiming:
    """Test timing reports and comparisons."""

    def test_table3_speedups(self, timing_fixture_paths):
        old, new = (load_report(p) for p in timing_fixture_paths)
        rows = {r.stage: r for r in compare_reports(old, new)}
        assert round(rows["detect_predict_mask"].speedup, 4) == 1.9024
        assert round(rows["detect_predict_nomask"].speedup, 4) == 2.5495
        assert round(rows["face_recognition"].speedup, 4) == 22.7723
        assert round(rows["person_identification"].speedup, 4) == 0.9747
        assert rows["person_identification"].anomalous
        assert not rows["face_recognition"].anomalous

    def test_identical_reports(self):
        report = TimingReport(
            detect_predict_mask_s=0.1,
            detect_predict_nomask_s=0.2,
            face_recognition_s=0.3,
            person_identification_s=0.4,
        )
        assert [r.speedup for r in compare_reports(report, report)] == [1.0] * 4

    def test_non_positive_baseline(self):
        with pytest.raises(NonPositiveTime) as exc:
            compare_reports(TimingReport(), TimingReport())
        assert exc.value.stage == "detect_predict_mask"

    def test_text_format(self):
        report = TimingReport(detect_predict_mask_s=0.0234)
        text = report.to_text()
        assert text.splitlines()[0] == "detect_predict_mask 0.0234"
        assert parse_report(text) == report

    def test_parse_errors(self):
        with pytest.raises(DataFormatError):
            parse_report("detect_predict_mask 0.1\n")
        with pytest.raises(DataFormatError) as exc:
            parse_report("detect_predict_mask x\n")
        assert exc.value.line_number == 1

    def test_accumulator_means(self):
        acc = TimingAccumulator()
        acc.add("face_recognition", 0.1)
        acc.add("face_recognition", 0.3)
        report = acc.report()
        assert report.face_recognition_s == pytest.approx(0.2)
        assert report.detect_predict_mask_s == 0.0


class TestProcessFrame:
    """Test the per-face state machine."""

    def test_masked_frontal(self, pipeline):
        events = pipeline.process_frame(frame_of(face_line("masked")))
        assert kinds(events) == [EventKind.FACE_DETECTED, EventKind.MASK_OK]

    def test_no_faces(self, pipeline):
        assert pipeline.process_frame(frame_of()) == []

    def test_unmasked_enrolled(self, pipeline):
        events = pipeline.process_frame(frame_of(face_line(feature="0,3,0,0")))
        assert kinds(events) == [
            EventKind.FACE_DETECTED,
            EventKind.NO_MASK,
            EventKind.IDENTIFIED,
            EventKind.NOTIFIED,
        ]
        assert events[2].person_id == "bob"
        assert events[2].score == 1.0
        assert events[3].delivered
        assert len(pipeline.notifier.transport.messages) == 1

    def test_unknown_person(self, pipeline):
        events = pipeline.process_frame(frame_of(face_line(feature="0,0,0,1")))
        assert kinds(events)[2:] == [EventKind.UNKNOWN_PERSON, EventKind.NOTIFIED]
        assert events[3].person_id is None
        assert pipeline.notifier.transport.messages[0].subject.endswith("unknown person")

    def test_non_frontal_skipped_before_mask_check(self, pipeline):
        events = pipeline.process_frame(frame_of(face_line(landmarks=PROFILE)))
        assert kinds(events) == [EventKind.FACE_DETECTED, EventKind.NON_FRONTAL_SKIPPED]
        assert pipeline.notifier.transport.messages == []

    def test_dimension_mismatch_is_face_error(self, pipeline):
        events = pipeline.process_frame(
            frame_of(face_line(feature="1,0"), face_line("masked"))
        )
        assert kinds(events) == [
            EventKind.FACE_DETECTED,
            EventKind.NO_MASK,
            EventKind.FACE_ERROR,
            EventKind.FACE_DETECTED,
            EventKind.MASK_OK,
        ]
        check_event_grammar(events)

    def test_box_outside_frame_is_face_error(self, pipeline):
        events = pipeline.process_frame(frame_of(face_line(box="700 10 40 40")))
        assert kinds(events) == [EventKind.FACE_DETECTED, EventKind.FACE_ERROR]

    def test_failed_notification_is_not_an_abort(self, small_gallery, virtual_clock):
        pipeline = Pipeline(small_gallery, Notifier(OfflineTransport()), clock=virtual_clock)
        events = pipeline.process_frame(frame_of(face_line(), face_line("masked")))
        assert events[3].kind is EventKind.NOTIFIED
        assert not events[3].delivered
        assert kinds(events)[-1] is EventKind.MASK_OK

    def test_stage_durations_within_wall_time(self, pipeline, virtual_clock):
        frame = frame_of(face_line(), face_line("masked"), face_line(landmarks=PROFILE))
        start = virtual_clock.monotonic()
        events = pipeline.process_frame(frame)
        wall = virtual_clock.monotonic() - start
        assert all(e.stage_seconds >= 0 for e in events)
        assert sum(e.stage_seconds for e in events) <= wall + virtual_clock.tick

    def test_true_id_is_ignored(self, pipeline, small_gallery, virtual_clock):
        a = pipeline.process_frame(frame_of(face_line(true_id="alice", feature="0,1,0,0")))
        other = Pipeline(small_gallery, Notifier(RecordingTransport()), clock=VirtualClock())
        b = other.process_frame(frame_of(face_line(true_id="carol", feature="0,1,0,0")))
        assert a == b

    def test_threshold_from_config(self, small_gallery, virtual_clock):
        pipeline = Pipeline(
            small_gallery,
            Notifier(RecordingTransport()),
            PipelineConfig(threshold=0.99),
            clock=virtual_clock,
        )
        events = pipeline.process_frame(frame_of(face_line(feature="1,0.5,0,0")))
        assert events[2].kind is EventKind.UNKNOWN_PERSON

    def test_one_shot_function(self, small_gallery):
        events = process_frame(
            frame_of(face_line("masked")), small_gallery, 0.5, Notifier(RecordingTransport())
        )
        assert kinds(events) == [EventKind.FACE_DETECTED, EventKind.MASK_OK]

    def test_models_loaded_once_across_frames(self, pipeline):
        for i in range(1, 6):
            pipeline.process_frame(frame_of(face_line(), frame_id=i))
        assert pipeline.registry.load_count("recognizer") == 1

    def test_one_shot_calls_share_loaded_models(self, small_gallery):
        notifier = Notifier(RecordingTransport())
        for i in (1, 2):
            process_frame(frame_of(face_line(), frame_id=i), small_gallery, 0.5, notifier)
        shared = default_registry()
        for key in ("detector", "mask_classifier", "recognizer"):
            assert shared.load_count(key) == 1


class TestRunScript:
    """End-to-end runs over the bundled demo script."""

    def test_demo_counts(self, demo_script_path, demo_gallery_path, sink_path):
        events, report = run_script(
            demo_script_path,
            load(demo_gallery_path),
            Notifier(FileSinkTransport(sink_path)),
            clock=VirtualClock(),
        )
        counts = Counter(e.kind for e in events)
        assert counts == {
            EventKind.FACE_DETECTED: 27,
            EventKind.MASK_OK: 8,
            EventKind.NON_FRONTAL_SKIPPED: 5,
            EventKind.NO_MASK: 14,
            EventKind.IDENTIFIED: 11,
            EventKind.UNKNOWN_PERSON: 3,
            EventKind.NOTIFIED: 14,
        }
        check_event_grammar(events)
        assert len(parse_sink(sink_path)) == counts[EventKind.NOTIFIED]
        assert report.face_recognition_s > 0
        frames = load_script(demo_script_path)
        assert identification_accuracy(frames, events) == 1.0

    def test_masked_faces_never_notify(self, demo_script_path, demo_gallery_path):
        events, _ = run_script(
            demo_script_path, load(demo_gallery_path), Notifier(RecordingTransport()), clock=VirtualClock()
        )
        masked = set()
        for e in events:
            if e.kind is EventKind.MASK_OK:
                masked.add((e.frame_id, e.face_index))
        assert not any(
            e.kind is EventKind.NOTIFIED and (e.frame_id, e.face_index) in masked for e in events
        )

    def test_virtual_clock_replay_is_identical(self, demo_script_path, demo_gallery_path, tmp_path):
        outputs = []
        for run in range(2):
            events_out = tmp_path / f"events{run}.tsv"
            timing_out = tmp_path / f"timing{run}.txt"
            run_script(
                demo_script_path,
                load(demo_gallery_path),
                Notifier(RecordingTransport()),
                clock=VirtualClock(),
                events_out=events_out,
                timing_out=timing_out,
            )
            outputs.append((events_out.read_bytes(), timing_out.read_bytes()))
        assert outputs[0] == outputs[1]

    def test_empty_script(self, tmp_path, small_gallery):
        script = tmp_path / "empty.txt"
        script.write_text("# no frames\n")
        events, report = run_script(script, small_gallery, Notifier(RecordingTransport()))
        assert events == []
        assert report == TimingReport()

    def test_bad_script_line(self, tmp_path, small_gallery):
        script = tmp_path / "bad.txt"
        script.write_text("FRAME 1 0 640 480\nFACE 1 2 3\n")
        with pytest.raises(ScriptParseError) as exc:
            run_script(script, small_gallery, Notifier(RecordingTransport()))
        assert exc.value.line_number == 2

    def test_unrepresentable_timestamp_rejected_before_alerting(self, tmp_path, small_gallery):
        script = tmp_path / "far_future.txt"
        script.write_text("FRAME 1 1e12 640 480\n" + face_line() + "\n")
        transport = RecordingTransport()
        with pytest.raises(ScriptParseError) as exc:
            run_script(script, small_gallery, Notifier(transport))
        assert exc.value.line_number == 1
        assert transport.messages == []

    def test_gallery_dim_mismatch_per_face(self, demo_script_path):
        g = enroll(Gallery(dim=8), "zed", [1.0] * 8)
        events, _ = run_script(demo_script_path, g, Notifier(RecordingTransport()), clock=VirtualClock())
        assert Counter(e.kind for e in events)[EventKind.FACE_ERROR] == 14


class TestObservation:
    """Test the scripted face value type."""

    def test_frame_requires_positive_size(self):
        with pytest.raises(pydantic.ValidationError):
            Frame(frame_id=1, timestamp_s=0.0, width=0, height=10)

    def test_feature_nonzero(self):
        base = frame_of(face_line()).faces[0]
        with pytest.raises(pydantic.ValidationError):
            FaceObservation(
                box=base.box,
                landmarks=base.landmarks,
                mask_label=MaskLabel.UNMASKED,
                feature=(0.0, 0.0),
            )
