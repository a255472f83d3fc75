"""
Base classes and utilities for the maskwatch library.

This module contains the hand-written infrastructure shared by every domain
module: the exception hierarchy, type aliases and clocks.
"""

from .clock import Clock, SystemClock, VirtualClock
from .exceptions import (
    DataFormatError,
    DegenerateLandmarks,
    DimensionMismatch,
    EmptyBatch,
    EmptyCurve,
    EmptyIntersection,
    FormatError,
    InvalidAddress,
    InvalidLabel,
    InvariantViolation,
    IoFailure,
    LoaderFailure,
    MaskwatchError,
    NoGroundTruth,
    NonPositiveTime,
    RegistryError,
    ScriptParseError,
    SinkUnavailable,
    UnknownKey,
    ValidationError,
    ZeroEmbedding,
    ZeroVector,
)
from .types import Matrix, PathLike, PersonID, Vector

__all__ = [
    # Clocks
    "Clock",
    "SystemClock",
    "VirtualClock",
    # Exceptions
    "MaskwatchError",
    "ValidationError",
    "DimensionMismatch",
    "InvalidLabel",
    "ZeroVector",
    "ZeroEmbedding",
    "EmptyBatch",
    "EmptyIntersection",
    "DegenerateLandmarks",
    "InvalidAddress",
    "NonPositiveTime",
    "NoGroundTruth",
    "EmptyCurve",
    "DataFormatError",
    "FormatError",
    "ScriptParseError",
    "IoFailure",
    "RegistryError",
    "UnknownKey",
    "LoaderFailure",
    "SinkUnavailable",
    "InvariantViolation",
    # Types
    "Vector",
    "Matrix",
    "PathLike",
    "PersonID",
]
