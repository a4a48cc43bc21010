from __future__ import annotations

import math
from collections import deque


def error_estimate(prediction: float, observation: float, sliding_mean: float) -> float:
    """|prediction - observation| / sliding_mean; NaN when the mean is zero."""
    if sliding_mean == 0:
        return math.nan
    return abs(prediction - observation) / sliding_mean


class ErrorEstimateTask:
    """Normalized prediction error against a per-key sliding mean of observations.

    The window includes the current observation. A zero mean yields a NaN
    error with ``flagged=True`` and bumps the ``zero_mean`` counter.
    """

    def __init__(self, window: int = 90, counters=None) -> None:
        if window < 1:
            raise ValueError("window must be >= 1")
        self.window = window
        self.counters = counters if counters is not None else {}
        self._obs: dict = {}

    def process(self, msg, emit) -> None:
        f = msg.fields
        if "observed" not in f or "prediction" not in f:
            self.counters["missing_observation"] = self.counters.get("missing_observation", 0) + 1
            return
        o = float(f["observed"])
        buf = self._obs.get(msg.key)
        if buf is None:
            buf = self._obs[msg.key] = deque(maxlen=self.window)
        buf.append(o)
        # exact sum: a running total drifts and would hide an all-zero window
        mean = math.fsum(buf) / len(buf)
        err = error_estimate(float(f["prediction"]), o, mean)
        flagged = mean == 0
        if flagged:
            self.counters["zero_mean"] = self.counters.get("zero_mean", 0) + 1
        emit(msg.derive({"stat": "error", "error": err, "flagged": flagged,
                         "model_version": f.get("model_version")}))
