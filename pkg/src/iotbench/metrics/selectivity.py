"""Expected end-to-end selectivity of a dataflow (sink arrivals per source emission)."""

from __future__ import annotations

from collections import deque
from typing import Iterable, Mapping, Optional

from ..runtime.config import dataflow_from_dict
from ..runtime.model import DUPLICATE, SINK, SOURCE, Dataflow


def task_gain(desc, stats: Optional[Mapping], unknown: float = 0.0) -> float:
    """Declared steady-state gain, else the measured out/in ratio, else ``unknown``."""
    if desc.selectivity.gain is not None:
        return float(desc.selectivity.gain)
    if stats is None or not stats.get("in_count"):
        return unknown
    return stats["out_count"] / stats["in_count"]


def task_input_rates(
    dataflow,
    task_stats: Optional[Mapping[str, Mapping]] = None,
    auxiliary: Iterable[str] = (),
    *,
    unknown_gain: float = 0.0,
) -> dict[str, float]:
    """Input rate of every non-source task per unit of data-source emission.

    Every edge carries each output of its producer; a duplicate edge into a
    task with p instances multiplies the rate by p. Data sources are weighted
    by their share of emissions; auxiliary sources (timers, model refresh)
    contribute nothing. Tasks with no declared or measured gain use
    ``unknown_gain``.
    """
    if isinstance(dataflow, dict):
        dataflow = dataflow_from_dict(dataflow)
    stats = task_stats or {}
    aux = set(auxiliary)
    sources = [t for t in dataflow.tasks if t.kind == SOURCE and t.name not in aux]
    if not sources:
        raise ValueError("dataflow has no data source")
    emitted = {t.name: (stats.get(t.name) or {}).get("out_count", 0) for t in sources}
    total = sum(emitted.values())
    rate_out: dict[str, float] = {}
    for t in sources:
        rate_out[t.name] = emitted[t.name] / total if total else 1.0 / len(sources)
    for name in aux:
        rate_out[name] = 0.0
    rate_in: dict[str, float] = {}
    for name in _topological(dataflow):
        desc = dataflow.task(name)
        if desc.kind == SOURCE:
            continue
        r = 0.0
        for e in dataflow.inbound(name):
            mult = desc.parallelism if e.routing == DUPLICATE else 1
            r += rate_out.get(e.src, 0.0) * mult
        rate_in[name] = r
        rate_out[name] = r * task_gain(desc, stats.get(name), unknown_gain)
    return rate_in


def steady_state_selectivity(
    dataflow,
    task_stats: Optional[Mapping[str, Mapping]] = None,
    auxiliary: Iterable[str] = (),
) -> float:
    """Expected sink arrivals per data-source emission."""
    if isinstance(dataflow, dict):
        dataflow = dataflow_from_dict(dataflow)
    rates = task_input_rates(dataflow, task_stats, auxiliary)
    return sum(rates.get(t.name, 0.0) for t in dataflow.tasks if t.kind == SINK)


def _topological(df: Dataflow) -> list[str]:
    indeg = {t.name: 0 for t in df.tasks}
    for e in df.edges:
        indeg[e.dst] += 1
    ready = deque(n for n, d in indeg.items() if d == 0)
    out = []
    while ready:
        n = ready.popleft()
        out.append(n)
        for e in df.outbound(n):
            indeg[e.dst] -= 1
            if indeg[e.dst] == 0:
                ready.append(e.dst)
    if len(out) != len(indeg):
        raise ValueError("dataflow has a cycle")
    return out
