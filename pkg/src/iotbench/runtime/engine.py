"""Threaded execution of a Dataflow.

Every task instance gets a thread and a bounded inbox. Producers block when a
downstream inbox is full, so saturation shows up as source slowdown and queue
high-water marks rather than drops.
"""

from __future__ import annotations

import logging
import random
import threading
import time
import zlib
from array import array
from collections import Counter, defaultdict, deque
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Optional

from .model import DUPLICATE, HASH, SINK, SOURCE, Dataflow, Edge, Message
from .validate import validate

log = logging.getLogger(__name__)

DEFAULT_QUEUE_CAPACITY = 10_000
DEFAULT_BATCH = 512
LATENCY_RESERVOIR = 10_000_000
BUCKET_NS = 1_000_000  # throughput telemetry resolution: 1 ms

_EOS = object()


class StartupError(RuntimeError):
    pass


class BoundedQueue:
    """Multi-producer single-consumer queue with a hard capacity."""

    def __init__(self, capacity: int = DEFAULT_QUEUE_CAPACITY) -> None:
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self._items: deque = deque()
        self._cond = threading.Condition(threading.Lock())
        self.high_water = 0

    def __len__(self) -> int:
        return len(self._items)

    def put_many(self, items) -> None:
        items = list(items) if not isinstance(items, list) else items
        pos, n = 0, len(items)
        items_q, cap, cond = self._items, self.capacity, self._cond
        with cond:
            while pos < n:
                room = cap - len(items_q)
                while room <= 0:
                    cond.wait()
                    room = cap - len(items_q)
                take = min(room, n - pos)
                if pos == 0 and take == n:
                    items_q.extend(items)
                else:
                    items_q.extend(items[pos : pos + take])
                pos += take
                depth = len(items_q)
                if depth > self.high_water:
                    self.high_water = depth
                cond.notify_all()

    def put(self, item) -> None:
        self.put_many([item])

    def get_batch(self, max_items: int = DEFAULT_BATCH) -> list:
        items_q, cond = self._items, self._cond
        with cond:
            while not items_q:
                cond.wait()
            n = len(items_q)
            if n <= max_items:
                out = list(items_q)
                items_q.clear()
            else:
                pop = items_q.popleft
                out = [pop() for _ in range(max_items)]
            cond.notify_all()
        return out


@dataclass
class InstanceContext:
    """Handed to every task factory; one per task instance."""

    task: str
    index: int
    parallelism: int
    seed: int
    params: dict
    services: Any = None
    counters: Counter = field(default_factory=Counter)

    def rng(self) -> random.Random:
        return random.Random(f"{self.seed}:{self.task}:{self.index}")


class TaskCounters:
    __slots__ = ("in_count", "out_count", "control_count", "failed")

    def __init__(self) -> None:
        self.in_count = 0
        self.out_count = 0
        self.control_count = 0
        self.failed = False


def stable_hash(value) -> int:
    """Stable across processes (unlike ``hash`` on str)."""
    return zlib.crc32(str(value).encode("utf-8"))


class _Route:
    __slots__ = ("edge", "queues", "rr", "field")

    def __init__(self, edge: Edge, queues: list[BoundedQueue], start: int) -> None:
        self.edge = edge
        self.queues = queues
        self.rr = start
        self.field = edge.hash_field


class Router:
    """Fans a producer instance's outputs onto its outbound edges.

    Each outbound edge receives every output. Within the edge's target task
    the routing picks the instance: duplicate copies to all of them, round
    robin rotates, hash uses :func:`stable_hash` of a field modulo the
    instance count.
    """

    def __init__(self, routes: list[_Route]) -> None:
        self.routes = routes

    def route(self, batch: list) -> None:
        for r in self.routes:
            qs = r.queues
            n = len(qs)
            if n == 1:
                qs[0].put_many(batch)
                continue
            mode = r.edge.routing
            if mode == DUPLICATE:
                for q in qs:
                    q.put_many(batch)
                continue
            parts: list[list] = [[] for _ in range(n)]
            if mode == HASH:
                fname = r.field
                for m in batch:
                    v = m.key if fname == "key" else m.fields.get(fname)
                    parts[zlib.crc32(str(v).encode("utf-8")) % n].append(m)
            else:
                i = r.rr
                for m in batch:
                    parts[i].append(m)
                    i += 1
                    if i == n:
                        i = 0
                r.rr = i
            for q, part in zip(qs, parts):
                if part:
                    q.put_many(part)

    def broadcast_eos(self) -> None:
        for r in self.routes:
            for q in r.queues:
                q.put(_EOS)


class SinkRecorder:
    """Per sink-instance latency and arrival telemetry."""

    def __init__(self, cap: int = LATENCY_RESERVOIR, seed: int = 0) -> None:
        self.cap = cap
        self.msg_ids = array("q")
        self.ingress = array("q")
        self.arrival = array("q")
        self.buckets: Counter = Counter()
        self.seen = 0
        self.unmatched = 0
        self._rng = random.Random(seed)

    def record(self, batch: list, now: int) -> None:
        self.buckets[now // BUCKET_NS] += len(batch)
        ids, ing, arr = self.msg_ids, self.ingress, self.arrival
        for m in batch:
            t0 = m.ingress_time
            if t0 is None:
                self.unmatched += 1
                continue
            self.seen += 1
            if len(ids) < self.cap:
                ids.append(m.msg_id if m.msg_id is not None else -1)
                ing.append(t0)
                arr.append(now)
            else:
                j = self._rng.randrange(self.seen)
                if j < self.cap:
                    ids[j] = m.msg_id if m.msg_id is not None else -1
                    ing[j] = t0
                    arr[j] = now


class SourceContext:
    """What a source implementation sees while running."""

    def __init__(self, runtime: "_Instance", handle: "RunHandle") -> None:
        self._inst = runtime
        self._handle = handle
        self.clock = handle.clock
        self.params = runtime.ctx.params
        self.index = runtime.ctx.index
        self.parallelism = runtime.ctx.parallelism
        self.counters = runtime.ctx.counters

    def should_stop(self) -> bool:
        return self._handle._stop.is_set()

    def wait(self, seconds: float) -> bool:
        """Sleep up to ``seconds``; returns True if a stop was requested."""
        return self._handle._stop.wait(seconds)

    @property
    def start_ns(self) -> int:
        return self._handle.start_ns

    def emit(self, batch: list) -> None:
        if not batch:
            return
        inst = self._inst
        now = self.clock()
        next_id = inst.next_id
        for m in batch:
            m.msg_id = next_id
            next_id += 1
            m.ingress_time = now
        inst.next_id = next_id
        if not inst.auxiliary:
            inst.emit_buckets[now // BUCKET_NS] += len(batch)
        inst.counters.out_count += len(batch)
        inst.router.route(batch)

    def emit_control(self, batch: list) -> None:
        """Emit without counting toward data-plane telemetry."""
        if not batch:
            return
        inst = self._inst
        now = self.clock()
        for m in batch:
            m.msg_id = inst.next_id
            inst.next_id += 1
            m.ingress_time = now
        inst.counters.out_count += len(batch)
        inst.router.route(batch)


class _Instance:
    def __init__(self, handle, desc, index, impl, ctx: InstanceContext, id_prefix: int) -> None:
        self.handle = handle
        self.desc = desc
        self.index = index
        self.impl = impl
        self.ctx = ctx
        self.inbox: Optional[BoundedQueue] = None
        self.router: Optional[Router] = None
        self.expected_eos = 0
        self.counters = TaskCounters()
        self.next_id = id_prefix << 40
        self.emit_buckets: Counter = Counter()
        self.recorder: Optional[SinkRecorder] = None
        self.auxiliary = bool(getattr(impl, "auxiliary", False))
        self.thread: Optional[threading.Thread] = None
        self.error: Optional[BaseException] = None

    @property
    def label(self) -> str:
        return f"{self.desc.name}[{self.index}]"

    def run_source(self) -> None:
        try:
            self.impl.run(SourceContext(self, self.handle))
        except BaseException as exc:  # reported through RunHandle.failures
            self.error = exc
            self.counters.failed = True
            log.exception("source %s failed", self.label)
        finally:
            self.handle._source_done(self)
            self.router.broadcast_eos()

    def run_task(self) -> None:
        inbox, router, c = self.inbox, self.router, self.counters
        process = self.impl.process
        out: list = []
        emit = out.append
        eos_left = self.expected_eos
        recorder = self.recorder
        clock = self.handle.clock
        next_id = self.next_id
        failing = False
        while eos_left:
            batch = inbox.get_batch()
            if recorder is not None:
                data = [m for m in batch if m is not _EOS]
                if data:
                    recorder.record(data, clock())
            for m in batch:
                if m is _EOS:
                    eos_left -= 1
                    continue
                if m.control is not None:
                    c.control_count += 1
                else:
                    c.in_count += 1
                if failing:
                    continue
                try:
                    process(m, emit)
                except Exception as exc:
                    self.error = exc
                    c.failed = True
                    failing = True
                    log.exception("task %s failed", self.label)
            if out:
                for m in out:
                    if m.msg_id is None:
                        m.msg_id = next_id
                        next_id += 1
                c.out_count += len(out)
                if router is not None:
                    router.route(out)
                out.clear()
        finish = getattr(self.impl, "finish", None)
        if finish is not None and not failing:
            finish(emit)
            if out:
                for m in out:
                    if m.msg_id is None:
                        m.msg_id = next_id
                        next_id += 1
                c.out_count += len(out)
                if router is not None:
                    router.route(out)
                out.clear()
        self.next_id = next_id
        if router is not None:
            router.broadcast_eos()


@dataclass
class TaskStats:
    name: str
    instances: int
    in_count: int
    out_count: int
    control_count: int
    queue_high_water: int
    errors: dict


Factory = Callable[[InstanceContext], Any]


class RunHandle:
    """Live view of a running dataflow; counters are readable at any time."""

    def __init__(
        self,
        dataflow: Dataflow,
        duration: Optional[float],
        registry: Mapping[str, Factory],
        *,
        queue_capacity: int = DEFAULT_QUEUE_CAPACITY,
        seed: int = 0,
        services: Any = None,
        clock: Callable[[], int] = time.monotonic_ns,
        monitor_interval: float = 0.1,
        latency_cap: int = LATENCY_RESERVOIR,
    ) -> None:
        problems = validate(dataflow)
        if problems:
            raise StartupError("invalid dataflow: " + "; ".join(map(str, problems)))
        missing = [t.name for t in dataflow.tasks if t.name not in registry]
        if missing:
            raise StartupError(f"no implementation registered for task(s): {', '.join(missing)}")
        self.dataflow = dataflow
        self.duration = duration
        self.queue_capacity = queue_capacity
        self.seed = seed
        self.clock = clock
        self.monitor_interval = monitor_interval
        self._stop = threading.Event()
        self._done = threading.Event()
        self._lock = threading.Lock()
        self.instances: dict[str, list[_Instance]] = {}
        self.start_ns = 0
        self.sources_stopped_ns: Optional[int] = None
        self.end_ns: Optional[int] = None
        self.queue_samples: list[tuple[int, dict]] = []

        prefix = 1
        for desc in dataflow.tasks:
            insts = []
            for i in range(desc.parallelism):
                ctx = InstanceContext(desc.name, i, desc.parallelism, seed, dict(desc.params), services)
                try:
                    impl = registry[desc.name](ctx)
                except Exception as exc:
                    raise StartupError(f"could not instantiate {desc.name}[{i}]: {exc}") from exc
                inst = _Instance(self, desc, i, impl, ctx, prefix)
                prefix += 1
                if desc.kind != SOURCE:
                    inst.inbox = BoundedQueue(queue_capacity)
                if desc.kind == SINK:
                    inst.recorder = SinkRecorder(latency_cap, seed=seed + prefix)
                insts.append(inst)
            self.instances[desc.name] = insts

        for desc in dataflow.tasks:
            for inst in self.instances[desc.name]:
                routes = []
                for e in dataflow.outbound(desc.name):
                    qs = [t.inbox for t in self.instances[e.dst]]
                    routes.append(_Route(e, qs, inst.index % len(qs)))
                inst.router = Router(routes) if routes else None
            n_up = sum(dataflow.task(e.src).parallelism for e in dataflow.inbound(desc.name))
            for inst in self.instances[desc.name]:
                inst.expected_eos = n_up

        self._live_sources = sum(
            1 for d in dataflow.tasks if d.kind == SOURCE for i in self.instances[d.name] if not i.auxiliary
        )

    # lifecycle -------------------------------------------------------------

    def start(self) -> "RunHandle":
        self.start_ns = self.clock()
        threads = []
        for desc in self.dataflow.tasks:
            for inst in self.instances[desc.name]:
                target = inst.run_source if desc.kind == SOURCE else inst.run_task
                inst.thread = threading.Thread(target=target, name=inst.label, daemon=True)
                threads.append(inst.thread)
        # consumers first so that sources never race an unstarted thread
        for t in reversed(threads):
            t.start()
        self._supervisor = threading.Thread(target=self._supervise, name="supervisor", daemon=True)
        self._supervisor.start()
        return self

    def _supervise(self) -> None:
        deadline = None if self.duration is None else time.monotonic() + self.duration
        while not self._done.is_set():
            self._sample_queues()
            wait = self.monitor_interval
            if deadline is not None:
                left = deadline - time.monotonic()
                if left <= 0:
                    self.stop()
                    deadline = None
                else:
                    wait = min(wait, left)
            if self._all_finished():
                break
            self._done.wait(wait)
        self._sample_queues()

    def _sample_queues(self) -> None:
        depths = {
            name: sum(len(i.inbox) for i in insts)
            for name, insts in self.instances.items()
            if insts[0].inbox is not None
        }
        self.queue_samples.append((self.clock(), depths))

    def _source_done(self, inst: _Instance) -> None:
        with self._lock:
            if not inst.auxiliary:
                self._live_sources -= 1
                if self._live_sources <= 0:
                    if self.sources_stopped_ns is None:
                        self.sources_stopped_ns = self.clock()
                    self._stop.set()

    def stop(self) -> None:
        """Ask sources to stop; in-flight messages still drain."""
        with self._lock:
            if self.sources_stopped_ns is None:
                self.sources_stopped_ns = self.clock()
        self._stop.set()

    def _all_finished(self) -> bool:
        return all(
            i.thread is not None and not i.thread.is_alive()
            for insts in self.instances.values()
            for i in insts
        )

    def join(self, timeout: Optional[float] = None) -> "RunHandle":
        end = None if timeout is None else time.monotonic() + timeout
        for insts in self.instances.values():
            for i in insts:
                left = None if end is None else max(0.0, end - time.monotonic())
                i.thread.join(left)
                if i.thread.is_alive():
                    raise TimeoutError(f"{i.label} did not finish")
        self.end_ns = self.clock()
        self._done.set()
        self._supervisor.join()
        return self

    # introspection ---------------------------------------------------------

    @property
    def finished(self) -> bool:
        return self._done.is_set()

    @property
    def failures(self) -> dict[str, str]:
        return {
            i.label: repr(i.error)
            for insts in self.instances.values()
            for i in insts
            if i.error is not None
        }

    def task_stats(self, name: str) -> TaskStats:
        insts = self.instances[name]
        errors: Counter = Counter()
        for i in insts:
            errors.update(i.ctx.counters)
        return TaskStats(
            name=name,
            instances=len(insts),
            in_count=sum(i.counters.in_count for i in insts),
            out_count=sum(i.counters.out_count for i in insts),
            control_count=sum(i.counters.control_count for i in insts),
            queue_high_water=max((i.inbox.high_water for i in insts if i.inbox is not None), default=0),
            errors=dict(errors),
        )

    def stats(self) -> dict[str, TaskStats]:
        return {d.name: self.task_stats(d.name) for d in self.dataflow.tasks}

    def implementations(self, name: str) -> list:
        return [i.impl for i in self.instances[name]]

    def instance_counts(self, name: str) -> list[tuple[int, int]]:
        return [(i.counters.in_count, i.counters.out_count) for i in self.instances[name]]

    def in_flight(self) -> int:
        return sum(len(i.inbox) for insts in self.instances.values() for i in insts if i.inbox is not None)

    def telemetry(self) -> "Telemetry":
        from .telemetry import Telemetry

        return Telemetry.from_handle(self)


def start(
    dataflow: Dataflow,
    duration: Optional[float],
    registry: Mapping[str, Factory],
    **kwargs,
) -> RunHandle:
    """Launch a dataflow and return immediately with a live RunHandle."""
    return RunHandle(dataflow, duration, registry, **kwargs).start()


def run(
    dataflow: Dataflow,
    duration: Optional[float],
    registry: Mapping[str, Factory],
    *,
    timeout: Optional[float] = None,
    **kwargs,
) -> RunHandle:
    """Run a dataflow to completion.

    ``duration`` is in seconds; None runs until every finite source is
    exhausted. Sources stop at the deadline, queues drain, then this returns.
    """
    return start(dataflow, duration, registry, **kwargs).join(timeout)
