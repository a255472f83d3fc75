"""
Common type aliases for the maskwatch library.

This module provides the type definitions used throughout the package so
signatures read in domain terms (vectors, radians, person ids) rather than
raw numpy and builtin types.
"""

import os
from typing import Any

import numpy as np
from numpy.typing import NDArray

# Numeric containers
Vector = NDArray[np.float64]  # 1-D float array
Matrix = NDArray[np.float64]  # 2-D float array, row-major
IndexArray = NDArray[np.intp]
BoolArray = NDArray[np.bool_]

# Units
Radians = float
Degrees = float
Seconds = float  # durations from a monotonic clock, or epoch seconds
Pixels = float

# Identifiers
PersonID = str  # enrolled identity, no tabs or newlines
FrameID = int
FaceIndex = int
ImageID = str  # WIDER-style image identifier (usually a relative path)
ModelKey = str  # registry key, e.g. "detector"

# Filesystem
PathLike = str | os.PathLike[str]

# Loader return value stored by the model registry
ModelHandle = Any

__all__ = [
    "Vector",
    "Matrix",
    "IndexArray",
    "BoolArray",
    "Radians",
    "Degrees",
    "Seconds",
    "Pixels",
    "PersonID",
    "FrameID",
    "FaceIndex",
    "ImageID",
    "ModelKey",
    "PathLike",
    "ModelHandle",
]
