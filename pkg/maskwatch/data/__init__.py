"""Bundled fixtures: demo frame script, demo gallery, AP fixture and timing reports."""

from importlib.resources import as_file, files
from pathlib import Path

DEMO_SCRIPT = "demo_script.txt"
DEMO_GALLERY = "demo_gallery.txt"
AP_GROUND_TRUTH = "ap_ground_truth.txt"
AP_DETECTIONS = "ap_detections.txt"
TIMING_OLD = "timing_old.txt"
TIMING_NEW = "timing_new.txt"


def path(name: str) -> Path:
    """Filesystem path of a bundled fixture (the package is installed unzipped)."""
    with as_file(files(__name__) / name) as resolved:
        return Path(resolved)
