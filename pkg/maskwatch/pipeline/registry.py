"""
Load-once model registry.

Each key maps to a loader callable. The first :meth:`ModelRegistry.get`
runs the loader under a per-key lock; later calls (from any thread) return
the cached handle. A loader that raises is never retried: the failure is
cached and re-raised on every subsequent get.
"""

import logging
import threading
from collections.abc import Callable
from typing import Any

from ..base.exceptions import LoaderFailure, UnknownKey
from ..base.types import ModelHandle, ModelKey

logger = logging.getLogger(__name__)

Loader = Callable[[], ModelHandle]


class _Slot:
    __slots__ = ("loader", "lock", "loaded", "handle", "failure", "load_count")

    def __init__(self, loader: Loader) -> None:
        self.loader = loader
        self.lock = threading.Lock()
        self.loaded = False
        self.handle: Any = None
        self.failure: LoaderFailure | None = None
        self.load_count = 0


class ModelRegistry:
    def __init__(self) -> None:
        self._slots: dict[ModelKey, _Slot] = {}
        self._lock = threading.Lock()

    def register(self, key: ModelKey, loader: Loader, replace: bool = False) -> None:
        """
        Attach ``loader`` to ``key``.

        Re-registering a key that is already registered raises ``ValueError``
        unless ``replace`` is set; replacing drops any cached handle.
        """
        with self._lock:
            if key in self._slots and not replace:
                raise ValueError(f"Model key {key!r} is already registered")
            self._slots[key] = _Slot(loader)
        logger.debug("Registered model loader: %s", key)

    def register_if_absent(self, key: ModelKey, loader: Loader) -> bool:
        """Attach ``loader`` unless ``key`` already has one; True if it was attached."""
        with self._lock:
            if key in self._slots:
                return False
            self._slots[key] = _Slot(loader)
        logger.debug("Registered model loader: %s", key)
        return True

    def is_registered(self, key: ModelKey) -> bool:
        with self._lock:
            return key in self._slots

    def keys(self) -> list[ModelKey]:
        with self._lock:
            return list(self._slots)

    def _slot(self, key: ModelKey) -> _Slot:
        with self._lock:
            slot = self._slots.get(key)
        if slot is None:
            raise UnknownKey(f"No loader registered for model {key!r}", key=key)
        return slot

    def get(self, key: ModelKey) -> ModelHandle:
        slot = self._slot(key)
        if slot.loaded:
            return slot.handle
        if slot.failure is not None:
            raise slot.failure
        with slot.lock:
            if slot.loaded:
                return slot.handle
            if slot.failure is not None:
                raise slot.failure
            logger.info("Loading model into registry: %s", key)
            slot.load_count += 1
            try:
                handle = slot.loader()
            except Exception as e:
                logger.error("Loader for model %r failed: %s", key, e)
                slot.failure = LoaderFailure(f"Loader for model {key!r} failed", key=key, cause=e)
                raise slot.failure from e
            slot.handle = handle
            slot.loaded = True
            return handle

    def load_count(self, key: ModelKey) -> int:
        """How many times the loader for ``key`` has run (0 or 1)."""
        return self._slot(key).load_count


def get_model(reg: ModelRegistry, key: ModelKey) -> ModelHandle:
    """
    Fetch the model handle for ``key``, loading it on first use.

    Raises:
        UnknownKey: If no loader is registered for ``key``
        LoaderFailure: If the loader raised (now or on an earlier call)
    """
    return reg.get(key)


_default: ModelRegistry | None = None
_default_lock = threading.Lock()


def default_registry() -> ModelRegistry:
    """Process-wide registry shared by pipelines that are not given their own."""
    global _default
    if _default is None:
        with _default_lock:
            if _default is None:
                _default = ModelRegistry()
                logger.debug("Default model registry created")
    return _default
