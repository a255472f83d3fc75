"""
Frame pipeline: scripted input, load-once models, events and stage timing.
"""

from .engine import (
    DETECTOR_KEY,
    MASK_CLASSIFIER_KEY,
    RECOGNIZER_KEY,
    FaceDetector,
    FaceEmbedder,
    MaskClassifier,
    Pipeline,
    PipelineConfig,
    ScriptDetector,
    ScriptEmbedder,
    ScriptMaskClassifier,
    identification_accuracy,
    process_frame,
    register_oracle_models,
    run_script,
)
from .events import (
    EventKind,
    PipelineEvent,
    check_event_grammar,
    format_event_log,
    parse_event_log,
    write_event_log,
)
from .registry import ModelRegistry, default_registry, get_model
from .script import FaceObservation, Frame, MaskLabel, format_script, load_script, parse_script
from .timing import (
    STAGES,
    StageComparison,
    TimingAccumulator,
    TimingReport,
    compare_reports,
    load_report,
    parse_report,
    write_report,
)

__all__ = [
    "DETECTOR_KEY",
    "MASK_CLASSIFIER_KEY",
    "RECOGNIZER_KEY",
    "FaceDetector",
    "FaceEmbedder",
    "MaskClassifier",
    "Pipeline",
    "PipelineConfig",
    "ScriptDetector",
    "ScriptEmbedder",
    "ScriptMaskClassifier",
    "identification_accuracy",
    "process_frame",
    "register_oracle_models",
    "run_script",
    "EventKind",
    "PipelineEvent",
    "check_event_grammar",
    "format_event_log",
    "parse_event_log",
    "write_event_log",
    "ModelRegistry",
    "default_registry",
    "get_model",
    "FaceObservation",
    "Frame",
    "MaskLabel",
    "format_script",
    "load_script",
    "parse_script",
    "STAGES",
    "StageComparison",
    "TimingAccumulator",
    "TimingReport",
    "compare_reports",
    "load_report",
    "parse_report",
    "write_report",
]
