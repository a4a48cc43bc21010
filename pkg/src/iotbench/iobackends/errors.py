from __future__ import annotations

import logging
import time
from typing import Callable, TypeVar

log = logging.getLogger(__name__)

T = TypeVar("T")

DEFAULT_RETRIES = 3
DEFAULT_BACKOFF_S = 0.01


class BackendError(Exception):
    pass


class BackendUnavailable(BackendError):
    """Transient failure; worth retrying."""


class ObjectNotFound(BackendError, KeyError):
    def __str__(self) -> str:  # KeyError would repr() the argument
        return Exception.__str__(self)


class TableNotFound(BackendError, KeyError):
    def __str__(self) -> str:
        return Exception.__str__(self)


def with_retries(
    op: Callable[[], T],
    *,
    retries: int = DEFAULT_RETRIES,
    backoff_s: float = DEFAULT_BACKOFF_S,
    counters=None,
    sleep: Callable[[float], None] = time.sleep,
) -> T:
    """Run ``op``; on BackendUnavailable retry up to ``retries`` times.

    Delays double each attempt starting at ``backoff_s``. The last error is
    re-raised once retries are exhausted.
    """
    attempt = 0
    while True:
        try:
            return op()
        except BackendUnavailable as exc:
            if attempt >= retries:
                if counters is not None:
                    counters["backend_failures"] = counters.get("backend_failures", 0) + 1
                raise
            if counters is not None:
                counters["retries"] = counters.get("retries", 0) + 1
            delay = backoff_s * (2 ** attempt)
            log.debug("backend unavailable (%s); retry %d in %.3fs", exc, attempt + 1, delay)
            sleep(delay)
            attempt += 1
