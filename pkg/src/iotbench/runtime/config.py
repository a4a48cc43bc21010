"""Declarative dataflow documents (YAML or JSON).

Example::

    name: demo
    tasks:
      - {name: src, kind: source, impl: random_integers, params: {rate: 100}}
      - {name: avg, kind: aggregate, impl: average, selectivity: "N:1",
         stateful: true, window: {mode: count, width: 10, slide: 10}}
      - {name: sink, kind: sink, impl: log_sink}
    edges:
      - {from: src, to: avg}
      - {from: avg, to: sink, routing: hash, field: key}
"""

from __future__ import annotations

from pathlib import Path
from typing import Any

import yaml

from .model import ROUND_ROBIN, Dataflow, Edge, Selectivity, TaskDescriptor, WindowSpec


class ConfigError(ValueError):
    pass


def dataflow_from_dict(doc: dict[str, Any]) -> Dataflow:
    try:
        tasks = []
        for t in doc["tasks"]:
            window = t.get("window")
            tasks.append(
                TaskDescriptor(
                    name=t["name"],
                    kind=t["kind"],
                    selectivity=Selectivity.parse(str(t.get("selectivity", "1:1")), t.get("gain")),
                    parallelism=int(t.get("parallelism", 1)),
                    stateful=bool(t.get("stateful", False)),
                    window=WindowSpec(**window) if window else None,
                    impl=t.get("impl", t["name"]),
                    params=dict(t.get("params") or {}),
                )
            )
        edges = [
            Edge(e["from"], e["to"], e.get("routing", ROUND_ROBIN), e.get("field"))
            for e in doc.get("edges", [])
        ]
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"malformed dataflow document: {exc}") from exc
    return Dataflow(tasks, edges, name=doc.get("name", "dataflow"))


def dataflow_to_dict(df: Dataflow) -> dict[str, Any]:
    tasks = []
    for t in df.tasks:
        d: dict[str, Any] = {
            "name": t.name,
            "kind": t.kind,
            "impl": t.impl or t.name,
            "selectivity": str(t.selectivity),
            "parallelism": t.parallelism,
            "stateful": t.stateful,
        }
        if t.selectivity.gain is not None:
            d["gain"] = t.selectivity.gain
        if t.window is not None:
            d["window"] = {"mode": t.window.mode, "width": t.window.width, "slide": t.window.slide}
        if t.params:
            d["params"] = t.params
        tasks.append(d)
    edges = []
    for e in df.edges:
        d = {"from": e.src, "to": e.dst, "routing": e.routing}
        if e.hash_field:
            d["field"] = e.hash_field
        edges.append(d)
    return {"name": df.name, "tasks": tasks, "edges": edges}


def load_dataflow(path) -> Dataflow:
    text = Path(path).read_text(encoding="utf-8")
    doc = yaml.safe_load(text)  # JSON is a subset of YAML
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: expected a mapping at top level")
    return dataflow_from_dict(doc)
