"""Plumbing tasks: identity, sinks, and a fixed-cost sleep used for calibration."""

from __future__ import annotations

import logging
import time
from collections import deque
from typing import Optional

log = logging.getLogger(__name__)

SPIN_THRESHOLD_S = 0.0002


def precise_sleep(seconds: float) -> None:
    """Sleep for ``seconds`` with sub-100us overshoot.

    A coarse ``time.sleep`` covers all but the last ~0.2 ms, which is spent
    yielding in a short loop.
    """
    if seconds <= 0:
        return
    deadline = time.perf_counter() + seconds
    coarse = seconds - SPIN_THRESHOLD_S
    if coarse > 0:
        time.sleep(coarse)
    while time.perf_counter() < deadline:
        time.sleep(0)


class Identity:
    def process(self, msg, emit) -> None:
        emit(msg.derive(msg.fields))


class SleepTask:
    """Hold every message for a fixed service time, then pass it on."""

    def __init__(self, seconds: float) -> None:
        if seconds < 0:
            raise ValueError("sleep must be >= 0")
        self.seconds = seconds

    def process(self, msg, emit) -> None:
        precise_sleep(self.seconds)
        emit(msg.derive(msg.fields))


class LogSink:
    """Counts arrivals and logs every ``every``-th message at debug level."""

    def __init__(self, every: int = 10_000) -> None:
        self.every = max(1, every)
        self.count = 0

    def process(self, msg, emit) -> None:
        self.count += 1
        if self.count % self.every == 0:
            log.debug("sink received %d messages; last %r", self.count, msg)


class CollectSink:
    """Keeps received messages in arrival order (optionally only the last ``limit``)."""

    def __init__(self, limit: Optional[int] = None) -> None:
        self.messages: deque = deque(maxlen=limit)
        self.count = 0

    def process(self, msg, emit) -> None:
        self.count += 1
        self.messages.append(msg)
