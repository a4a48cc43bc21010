from __future__ import annotations

from collections import defaultdict, deque
from dataclasses import dataclass

from .model import (
    AGGREGATE,
    DUPLICATE,
    FILTER,
    HASH,
    ROUND_ROBIN,
    SINK,
    SOURCE,
    TASK_KINDS,
    TRANSFORM,
    Dataflow,
)


@dataclass(frozen=True)
class Violation:
    code: str
    subject: str
    detail: str

    def __str__(self) -> str:
        return f"[{self.code}] {self.subject}: {self.detail}"


def validate(dataflow: Dataflow) -> list[Violation]:
    """Check every structural invariant; returns one Violation per breach."""
    out: list[Violation] = []
    names = [t.name for t in dataflow.tasks]
    seen = set()
    for n in names:
        if n in seen:
            out.append(Violation("duplicate-task", n, "task name used more than once"))
        seen.add(n)
    by_name = {t.name: t for t in dataflow.tasks}

    for t in dataflow.tasks:
        if t.kind not in TASK_KINDS:
            out.append(Violation("bad-kind", t.name, f"unknown task kind {t.kind!r}"))
        if t.parallelism < 1:
            out.append(Violation("bad-parallelism", t.name, "parallelism must be >= 1"))
        if t.kind == TRANSFORM and not t.selectivity.is_one_to_one:
            out.append(Violation("selectivity", t.name, "transform must be 1:1"))
        if t.kind == FILTER:
            ratio = t.selectivity.max_ratio()
            if ratio is not None and ratio > 1:
                out.append(
                    Violation("selectivity", t.name, "filter must not emit more than it consumes")
                )
        if t.kind == AGGREGATE and t.window is None:
            out.append(Violation("window", t.name, "aggregate requires a window"))
        if t.window is not None:
            for v in t.window.violations():
                out.append(Violation("window", t.name, v))

    for e in dataflow.edges:
        label = e.describe()
        if e.src not in by_name or e.dst not in by_name:
            out.append(Violation("dangling-edge", label, "edge references an unknown task"))
            continue
        if e.routing not in (DUPLICATE, ROUND_ROBIN, HASH):
            out.append(Violation("bad-routing", label, f"unknown routing {e.routing!r}"))
        if e.routing == HASH and not e.hash_field:
            out.append(Violation("bad-routing", label, "hash routing needs a field name"))
        if by_name[e.dst].kind == SOURCE:
            out.append(Violation("source-inbound", label, "sources have no inbound edges"))
        if by_name[e.src].kind == SINK:
            out.append(Violation("sink-outbound", label, "sinks have no outbound edges"))

    for t in dataflow.tasks:
        if t.stateful and t.parallelism > 1:
            for e in dataflow.inbound(t.name):
                if e.routing != HASH:
                    out.append(
                        Violation(
                            "stateful-routing",
                            t.name,
                            f"stateful parallel task requires hash routing (edge {e.describe()})",
                        )
                    )

    valid_edges = [e for e in dataflow.edges if e.src in by_name and e.dst in by_name]
    out.extend(_graph_violations(dataflow, valid_edges))
    return out


def _graph_violations(dataflow: Dataflow, edges) -> list[Violation]:
    out: list[Violation] = []
    if not dataflow.tasks:
        return [Violation("empty", dataflow.name, "dataflow has no tasks")]
    succ = defaultdict(list)
    undirected = defaultdict(set)
    for e in edges:
        succ[e.src].append(e.dst)
        undirected[e.src].add(e.dst)
        undirected[e.dst].add(e.src)

    start = dataflow.tasks[0].name
    comp = {start}
    todo = deque([start])
    while todo:
        n = todo.popleft()
        for m in undirected[n]:
            if m not in comp:
                comp.add(m)
                todo.append(m)
    for t in dataflow.tasks:
        if t.name not in comp:
            out.append(Violation("disconnected", t.name, "task not connected to the dataflow"))

    sources = [t.name for t in dataflow.tasks if t.kind == SOURCE]
    if not sources:
        out.append(Violation("no-source", dataflow.name, "dataflow has no source task"))
    reach = set(sources)
    todo = deque(sources)
    while todo:
        n = todo.popleft()
        for m in succ[n]:
            if m not in reach:
                reach.add(m)
                todo.append(m)
    for t in dataflow.tasks:
        if t.kind != SOURCE and t.name not in reach:
            out.append(Violation("unreachable", t.name, "task not reachable from any source"))

    # cycles: iterative DFS colouring
    colour = {t.name: 0 for t in dataflow.tasks}
    for root in colour:
        if colour[root]:
            continue
        stack = [(root, iter(succ[root]))]
        colour[root] = 1
        while stack:
            node, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                colour[node] = 2
                stack.pop()
            elif colour.get(nxt) == 1:
                out.append(
                    Violation("cycle", f"{node}->{nxt}", "cycles are not supported by the scheduler")
                )
            elif colour.get(nxt) == 0:
                colour[nxt] = 1
                stack.append((nxt, iter(succ[nxt])))
    return out
