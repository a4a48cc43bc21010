from __future__ import annotations

from dataclasses import dataclass

DEFAULT_Q = 1e-4
DEFAULT_R = 1e-2


@dataclass
class KalmanState:
    """Scalar random-walk Kalman filter."""

    x_hat: float = 0.0
    p: float = 1.0
    q: float = DEFAULT_Q
    r: float = DEFAULT_R

    def __post_init__(self) -> None:
        if self.q < 0 or self.r < 0:
            raise ValueError("q and r must be non-negative")

    def update(self, z: float) -> float:
        p = self.p + self.q
        denom = p + self.r
        g = p / denom if denom > 0 else 1.0
        self.x_hat += g * (z - self.x_hat)
        self.p = (1.0 - g) * p
        return self.x_hat


def kalman_update(state: KalmanState, measurement: float) -> float:
    return state.update(measurement)


class KalmanTask:
    """Smooth ``field`` with one filter per message key."""

    def __init__(self, q: float = DEFAULT_Q, r: float = DEFAULT_R, field: str = "value",
                 x0: float = 0.0, p0: float = 1.0) -> None:
        KalmanState(x0, p0, q, r)  # validate early
        self.q, self.r, self.x0, self.p0 = q, r, x0, p0
        self.field = field
        self.filters: dict = {}

    def process(self, msg, emit) -> None:
        f = self.filters.get(msg.key)
        if f is None:
            f = self.filters[msg.key] = KalmanState(self.x0, self.p0, self.q, self.r)
        fields = dict(msg.fields)
        fields[self.field] = f.update(float(msg.fields[self.field]))
        fields["smoothed"] = True
        emit(msg.derive(fields))
