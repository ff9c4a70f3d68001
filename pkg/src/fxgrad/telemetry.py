"""Timing spans for hot entry points.

``trace(name)`` wraps a function and logs how long each call took at DEBUG
level under the ``fxgrad.trace`` logger. When DEBUG is off the wrapper only
costs one ``isEnabledFor`` check.
"""

from __future__ import annotations

import functools
import logging
import time
from typing import Callable, TypeVar

F = TypeVar("F", bound=Callable)

_log = logging.getLogger("fxgrad.trace")


def trace(name: str) -> Callable[[F], F]:
    def _decorator(func: F) -> F:
        @functools.wraps(func)
        def _wrapped(*args, **kwargs):
            if not _log.isEnabledFor(logging.DEBUG):
                return func(*args, **kwargs)
            start = time.perf_counter()
            try:
                return func(*args, **kwargs)
            finally:
                _log.debug("%s took %.1f ms", name, (time.perf_counter() - start) * 1000.0)

        return _wrapped  # type: ignore[return-value]

    return _decorator


__all__ = ["trace"]
