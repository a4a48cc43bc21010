from __future__ import annotations

import math
from collections import deque
from typing import Sequence

from ..runtime.model import WindowSpec
from ..runtime.window import Windower


def windowed_average(batch: Sequence, field: str = "value", counters=None) -> float:
    """Arithmetic mean of ``field`` over a window batch.

    Non-numeric values are skipped and counted under ``non_numeric``.
    """
    if not batch:
        raise ValueError("empty window")
    vals = []
    for m in batch:
        v = m.fields.get(field) if hasattr(m, "fields") else m
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            try:
                v = float(v)
            except (TypeError, ValueError):
                if counters is not None:
                    counters["non_numeric"] = counters.get("non_numeric", 0) + 1
                continue
        if isinstance(v, float) and math.isnan(v):
            if counters is not None:
                counters["non_numeric"] = counters.get("non_numeric", 0) + 1
            continue
        vals.append(v)
    if not vals:
        return math.nan
    return math.fsum(vals) / len(vals)


class AverageTask:
    """Aggregate (N:1) mean over count windows, one window per message key.

    Sliding windows with ``slide == 1`` keep a running sum so each arrival is
    O(1); other shapes go through :class:`Windower`.
    """

    def __init__(self, window: WindowSpec, field: str = "value", counters=None) -> None:
        self.window = window
        self.field = field
        self.counters = counters if counters is not None else {}
        self._windows: dict = {}
        self._fast = window.mode == "count" and window.slide == 1

    def process(self, msg, emit) -> None:
        if self._fast:
            self._process_sliding(msg, emit)
            return
        w = self._windows.get(msg.key)
        if w is None:
            w = self._windows[msg.key] = Windower(self.window)
        for batch in w.push(msg):
            emit(batch[-1].derive({"stat": "average", "average": windowed_average(batch, self.field, self.counters),
                                   "count": len(batch)}))

    def _process_sliding(self, msg, emit) -> None:
        v = msg.fields.get(self.field)
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            self.counters["non_numeric"] = self.counters.get("non_numeric", 0) + 1
            return
        st = self._windows.get(msg.key)
        if st is None:
            st = self._windows[msg.key] = [deque(), 0.0, 0]
        buf = st[0]
        buf.append(v)
        st[1] += v
        width = self.window.width
        if len(buf) > width:
            st[1] -= buf.popleft()
        st[2] += 1
        if len(buf) == width:
            if st[2] % 1024 == 0:  # bound drift of the running sum
                st[1] = math.fsum(buf)
            emit(msg.derive({"stat": "average", "average": st[1] / width, "count": width}))
