"""Sliding-window univariate least squares (flat map, N:M)."""

from __future__ import annotations

from collections import deque
from typing import Optional


class SlidingRegressionState:
    def __init__(self, window: int = 10, horizon: int = 1) -> None:
        if window < 2:
            raise ValueError("window must be >= 2")
        if horizon < 1:
            raise ValueError("horizon must be >= 1")
        self.window = window
        self.horizon = horizon
        self.points: deque = deque(maxlen=window)
        self.degenerate = 0

    def fit(self) -> Optional[tuple[float, float]]:
        """(slope, intercept) of the OLS line through the window, centered form."""
        ts, ys = zip(*self.points)
        n = len(ts)
        mt = sum(ts) / n
        my = sum(ys) / n
        sxx = sxy = 0.0
        for t, y in zip(ts, ys):
            dt = t - mt
            sxx += dt * dt
            sxy += dt * (y - my)
        if sxx == 0.0:
            return None
        slope = sxy / sxx
        return slope, my - slope * mt

    def push(self, t: float, y: float) -> list[tuple[float, float]]:
        """Add a point; returns [(t_future, prediction)] once the window is full."""
        self.points.append((t, y))
        if len(self.points) < self.window:
            return []
        line = self.fit()
        if line is None:
            self.degenerate += 1
            return []
        slope, icept = line
        t_first, t_last = self.points[0][0], self.points[-1][0]
        step = (t_last - t_first) / (self.window - 1)
        return [(t_last + k * step, icept + slope * (t_last + k * step)) for k in range(1, self.horizon + 1)]


def sliding_regression(state: SlidingRegressionState, t: float, y: float) -> list[tuple[float, float]]:
    return state.push(t, y)


class SlidingRegressionTask:
    """Per-key sliding regression over ``field``.

    Time comes from ``t_field`` when given, otherwise from a per-key arrival
    index, so predictions are for the next ``horizon`` arrivals.
    """

    def __init__(self, window: int = 10, horizon: int = 1, field: str = "value",
                 t_field: Optional[str] = None, counters=None) -> None:
        SlidingRegressionState(window, horizon)
        self.window, self.horizon = window, horizon
        self.field = field
        self.t_field = t_field
        self.counters = counters if counters is not None else {}
        self.states: dict = {}
        self._index: dict = {}

    def process(self, msg, emit) -> None:
        key = msg.key
        st = self.states.get(key)
        if st is None:
            st = self.states[key] = SlidingRegressionState(self.window, self.horizon)
            self._index[key] = 0
        if self.t_field is None:
            t = self._index[key]
            self._index[key] = t + 1
        else:
            t = float(msg.fields[self.t_field])
        before = st.degenerate
        preds = st.push(t, float(msg.fields[self.field]))
        if st.degenerate != before:
            self.counters["degenerate_window"] = self.counters.get("degenerate_window", 0) + 1
        for k, (tf, yhat) in enumerate(preds, 1):
            emit(msg.derive({"stat": "slr", "t": tf, "prediction": yhat, "step": k}))
