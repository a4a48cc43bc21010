from __future__ import annotations

import socket
import threading
import time
from dataclasses import asdict, dataclass
from typing import Optional

import psutil

DEFAULT_PERIOD_S = 5.0


@dataclass(frozen=True)
class ResourceSample:
    timestamp: int  # monotonic ns, same clock as the engine
    host: str
    cpu_percent: float  # mean over logical cores
    mem_percent: float

    def as_dict(self) -> dict:
        return asdict(self)


class ResourceSampler:
    """Samples host CPU and memory utilization on a background thread."""

    def __init__(self, period_s: float = DEFAULT_PERIOD_S, host: Optional[str] = None) -> None:
        if period_s <= 0:
            raise ValueError("period must be > 0")
        self.period_s = period_s
        self.host = host or socket.gethostname()
        self.samples: list[ResourceSample] = []
        self._stop = threading.Event()
        self._thread: Optional[threading.Thread] = None

    def sample(self) -> ResourceSample:
        s = ResourceSample(time.monotonic_ns(), self.host, float(psutil.cpu_percent(interval=None)),
                           float(psutil.virtual_memory().percent))
        self.samples.append(s)
        return s

    def _loop(self) -> None:
        psutil.cpu_percent(interval=None)  # prime: the first reading is meaningless
        while not self._stop.wait(self.period_s):
            self.sample()

    def start(self) -> "ResourceSampler":
        self._stop.clear()
        self._thread = threading.Thread(target=self._loop, name="resource-sampler", daemon=True)
        self._thread.start()
        return self

    def stop(self) -> list[ResourceSample]:
        self._stop.set()
        if self._thread is not None:
            self._thread.join()
            self._thread = None
        return self.samples

    def __enter__(self) -> "ResourceSampler":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()
