"""Count and time windows over message sequences."""

from __future__ import annotations

from collections import deque
from typing import Iterable, Iterator, Optional

from .model import WindowSpec


class Windower:
    """Incremental window assembler.

    Count windows emit every ``slide`` arrivals once ``width`` messages have
    been seen. Time windows are aligned to event_time multiples of ``slide``
    (milliseconds) and are emitted when a message at or past the window end
    arrives.
    """

    def __init__(self, spec: WindowSpec) -> None:
        problems = spec.violations()
        if problems:
            raise ValueError("; ".join(problems))
        self.spec = spec
        self._buf: deque = deque()
        self._since_emit = 0
        self._next_end: Optional[int] = None

    def push(self, item) -> list[list]:
        if self.spec.mode == "count":
            return self._push_count(item)
        return self._push_time(item)

    def _push_count(self, item) -> list[list]:
        buf = self._buf
        buf.append(item)
        width = self.spec.width
        if len(buf) > width:
            buf.popleft()
        self._since_emit += 1
        if len(buf) == width and self._since_emit >= self.spec.slide:
            self._since_emit = 0
            return [list(buf)]
        if len(buf) < width:
            # the first batch is due exactly at `width` arrivals
            self._since_emit = min(self._since_emit, self.spec.slide - 1)
        return []

    def _push_time(self, msg) -> list[list]:
        t = msg.event_time
        width, slide = self.spec.width, self.spec.slide
        if self._next_end is None:
            self._next_end = (t // slide) * slide + slide
        out = []
        while t >= self._next_end:
            if not self._buf:
                self._next_end = (t // slide) * slide + slide
                break
            start = self._next_end - width
            batch = [m for m in self._buf if m.event_time >= start]
            if batch:
                out.append(batch)
            self._next_end += slide
            lo = self._next_end - width
            while self._buf and self._buf[0].event_time < lo:
                self._buf.popleft()
        self._buf.append(msg)
        return out

    def flush(self) -> list[list]:
        """Emit the trailing partial time window, if any (count windows never flush)."""
        if self.spec.mode != "time" or not self._buf:
            return []
        start = self._next_end - self.spec.width
        batch = [m for m in self._buf if m.event_time >= start]
        self._buf.clear()
        return [batch] if batch else []


def apply_window(spec: WindowSpec, stream: Iterable) -> Iterator[list]:
    """Yield window batches over ``stream`` in arrival order.

    Count windows accept any items; time windows need Message-like items with
    an ``event_time`` in milliseconds.
    """
    w = Windower(spec)
    for item in stream:
        yield from w.push(item)
    yield from w.flush()
