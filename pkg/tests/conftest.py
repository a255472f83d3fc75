"""
Pytest configuration and fixtures for maskwatch tests.
"""

import sys
from pathlib import Path

import numpy as np
import pytest

# Import maskwatch from the source tree
sys.path.insert(0, str(Path(__file__).parent.parent))

from maskwatch import data  # noqa: E402
from maskwatch.base.clock import VirtualClock  # noqa: E402
from maskwatch.gallery import Gallery, enroll  # noqa: E402
from maskwatch.notify import FileSinkTransport, Notifier  # noqa: E402


@pytest.fixture
def rng():
    """Seeded generator; every random test draws from it."""
    return np.random.default_rng(12345)


@pytest.fixture
def demo_script_path():
    return data.path(data.DEMO_SCRIPT)


@pytest.fixture
def demo_gallery_path():
    return data.path(data.DEMO_GALLERY)


@pytest.fixture
def small_gallery():
    """Three identities on the first three axes of a 4-dim space."""
    g = Gallery(dim=4)
    g = enroll(g, "alice", [1.0, 0.0, 0.0, 0.0])
    g = enroll(g, "bob", [0.0, 1.0, 0.0, 0.0])
    return enroll(g, "carol", [0.0, 0.0, 1.0, 0.0])


@pytest.fixture
def sink_path(tmp_path):
    return tmp_path / "alerts.txt"


@pytest.fixture
def file_notifier(sink_path):
    return Notifier(FileSinkTransport(sink_path))


@pytest.fixture
def virtual_clock():
    return VirtualClock(tick=0.001)


@pytest.fixture
def ap_fixture_paths():
    return data.path(data.AP_GROUND_TRUTH), data.path(data.AP_DETECTIONS)


@pytest.fixture
def timing_fixture_paths():
    return data.path(data.TIMING_OLD), data.path(data.TIMING_NEW)
