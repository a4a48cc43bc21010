"""Small dataflow-building helpers shared by the test modules."""

from __future__ import annotations

from iotbench.runtime import Dataflow, Edge, TaskDescriptor, run
from iotbench.runtime.model import SINK, SOURCE, Message
from iotbench.tasks import CollectSink


class ListSource:
    """Emits a fixed list of field dicts (with optional keys) in batches."""

    def __init__(self, rows, batch=64):
        self.rows = rows
        self.batch = batch

    def run(self, ctx):
        for lo in range(0, len(self.rows), self.batch):
            chunk = []
            for r in self.rows[lo:lo + self.batch]:
                if isinstance(r, tuple):
                    key, fields = r
                else:
                    key, fields = None, r
                chunk.append(Message(None, 0, None, dict(fields), key))
            ctx.emit(chunk)


def linear(middle, edges=None, sink_parallelism=1):
    """source -> middle tasks -> sink, wired with plain edges unless given."""
    tasks = [TaskDescriptor("source", SOURCE)] + list(middle) + [
        TaskDescriptor("sink", SINK, parallelism=sink_parallelism)]
    if edges is None:
        names = [t.name for t in tasks]
        edges = [Edge(a, b) for a, b in zip(names, names[1:])]
    return Dataflow(tasks, edges)


def collect_registry(rows, impls, sinks=("sink",)):
    """Registry with a ListSource, the given factories, and CollectSinks that remember themselves."""
    collected: dict[str, list] = {s: [] for s in sinks}
    reg = {"source": lambda ctx: ListSource(rows)}
    reg.update(impls)
    for s in sinks:
        def make(ctx, s=s):
            sink = CollectSink()
            collected[s].append(sink)
            return sink
        reg[s] = make
    return reg, collected


def run_collect(df, rows, impls, sinks=("sink",), **kw):
    reg, collected = collect_registry(rows, impls, sinks)
    handle = run(df, None, reg, timeout=60, **kw)
    return handle, collected
