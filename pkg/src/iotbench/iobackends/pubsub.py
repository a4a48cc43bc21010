"""Topic-based publish/subscribe with at-most-once delivery."""

from __future__ import annotations

import queue
import threading
from collections import defaultdict
from dataclasses import dataclass
from typing import Optional

from .errors import BackendUnavailable

AT_MOST_ONCE = "at_most_once"


@dataclass(frozen=True)
class PubSubMessage:
    topic: str
    payload: bytes
    qos: str = AT_MOST_ONCE

    def __post_init__(self) -> None:
        if self.qos != AT_MOST_ONCE:
            raise ValueError(f"unsupported qos {self.qos!r}; only {AT_MOST_ONCE} is implemented")
        if not self.topic or "+" in self.topic or "#" in self.topic:
            raise ValueError(f"bad publish topic {self.topic!r}")


def topic_matches(pattern: str, topic: str) -> bool:
    """MQTT-style filter match: ``+`` is one level, a trailing ``#`` is the rest."""
    p = pattern.split("/")
    t = topic.split("/")
    for i, part in enumerate(p):
        if part == "#":
            return i == len(p) - 1
        if i >= len(t):
            return False
        if part != "+" and part != t[i]:
            return False
    return len(p) == len(t)


class Subscription:
    def __init__(self, broker: "InProcessBroker", pattern: str) -> None:
        self.broker = broker
        self.pattern = pattern
        self._q: queue.SimpleQueue = queue.SimpleQueue()
        self.received = 0

    def _deliver(self, msg: PubSubMessage) -> None:
        self.received += 1
        self._q.put(msg)

    def get(self, timeout: Optional[float] = None) -> Optional[PubSubMessage]:
        try:
            return self._q.get(timeout=timeout)
        except queue.Empty:
            return None

    def drain(self) -> list[PubSubMessage]:
        out = []
        while True:
            try:
                out.append(self._q.get_nowait())
            except queue.Empty:
                return out

    def close(self) -> None:
        self.broker.unsubscribe(self)


class InProcessBroker:
    """Delivers each publish to the subscriptions present at publish time.

    Delivery on one topic is serialized, so per-topic order is preserved for
    every subscriber.
    """

    def __init__(self) -> None:
        self._subs: list[Subscription] = []
        self._lock = threading.Lock()
        self._topic_locks: dict[str, threading.Lock] = defaultdict(threading.Lock)
        self._routes: dict[str, tuple[threading.Lock, list[Subscription]]] = {}
        self.published = 0
        self.available = True

    def subscribe(self, pattern: str) -> Subscription:
        sub = Subscription(self, pattern)
        with self._lock:
            self._subs.append(sub)
            self._routes.clear()
        return sub

    def unsubscribe(self, sub: Subscription) -> None:
        with self._lock:
            if sub in self._subs:
                self._subs.remove(sub)
                self._routes.clear()

    def publish(self, msg: PubSubMessage) -> bool:
        if not self.available:
            raise BackendUnavailable("in-process broker marked unavailable")
        with self._lock:
            route = self._routes.get(msg.topic)
            if route is None:
                targets = [s for s in self._subs if topic_matches(s.pattern, msg.topic)]
                route = self._routes[msg.topic] = (self._topic_locks[msg.topic], targets)
            tlock, targets = route
            self.published += 1
        if not targets:
            return True
        with tlock:
            for s in targets:
                s._deliver(msg)
        return True

    def close(self) -> None:
        pass
