"""
Clocks used for stage timing.

Durations always come from a monotonic source; wall-clock epoch seconds are
only used for event timestamps and alert dates.
"""

import threading
import time
from typing import Protocol

from .types import Seconds


class Clock(Protocol):
    """Time source contract for the pipeline."""

    def monotonic(self) -> Seconds:
        """Return a monotonically non-decreasing reading in seconds."""
        ...

    def wall(self) -> Seconds:
        """Return seconds since the epoch."""
        ...


class SystemClock:
    """Real clock: ``time.perf_counter`` for durations, ``time.time`` for dates."""

    def monotonic(self) -> Seconds:
        return time.perf_counter()

    def wall(self) -> Seconds:
        return time.time()


class VirtualClock:
    """
    Scripted clock that advances by a fixed tick on every reading.

    Replaying a script against a fresh VirtualClock yields identical stage
    durations, which makes event logs and timing reports byte-reproducible.
    """

    def __init__(self, tick: Seconds = 0.001, start: Seconds = 0.0) -> None:
        if tick < 0:
            raise ValueError("tick must be non-negative")
        self.tick = tick
        self._now = start
        self._lock = threading.Lock()

    def monotonic(self) -> Seconds:
        with self._lock:
            self._now += self.tick
            return self._now

    def wall(self) -> Seconds:
        with self._lock:
            return self._now
