"""The micro-benchmark task catalog and single-task dataflows built from it."""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Optional

from ..runtime.model import (
    AGGREGATE,
    FILTER,
    FLATMAP,
    SINK,
    SOURCE,
    TRANSFORM,
    Dataflow,
    Edge,
    Selectivity,
    TaskDescriptor,
    WindowSpec,
)
from ..runtime.config import ConfigError
from ..runtime.validate import validate

# categories
PARSE, FILTERING, STATISTICAL, PREDICTIVE, IO = "Parse", "Filter", "Statistical", "Predictive", "IO"

MICRO_VALUE_HIGH = 1_000_000

# micro models score the random integer directly
MICRO_TREE = {
    "format": "iotbench-model", "format_version": 1, "kind": "decision_tree", "version": 1,
    "features": ["value"],
    "tree": {"attribute": "value", "threshold": 500_000,
             "left": {"attribute": "value", "threshold": 250_000, "left": {"label": "low"}, "right": {"label": "mid"}},
             "right": {"label": "high"}},
}
MICRO_REGRESSION = {
    "format": "iotbench-model", "format_version": 1, "kind": "linear_regression", "version": 1,
    "features": ["value"], "intercept": 1.0, "coefficients": [0.5],
}


@dataclass(frozen=True)
class CatalogEntry:
    code: str
    name: str
    category: str
    pattern: str
    sigma: str
    stateful: bool
    kind: str
    impl: str
    gain: Optional[float] = 1.0
    window: Optional[WindowSpec] = None
    params: dict = field(default_factory=dict, hash=False)
    needs: Optional[str] = None  # backend service the task talks to

    @property
    def selectivity(self) -> Selectivity:
        return Selectivity.parse(self.sigma, self.gain)

    def descriptor(self, name: Optional[str] = None, parallelism: int = 1, params: Optional[dict] = None) -> TaskDescriptor:
        return TaskDescriptor(
            name=name or self.code.lower(),
            kind=self.kind,
            selectivity=self.selectivity,
            parallelism=parallelism,
            stateful=self.stateful,
            window=self.window,
            impl=self.impl,
            params={**copy.deepcopy(self.params), **(params or {})},
        )


_ENTRIES = [
    CatalogEntry("XML", "XML Parse", PARSE, "Transform", "1:1", False, TRANSFORM, "xml_parse"),
    CatalogEntry("BLF", "Bloom Filter", FILTERING, "Filter", "1:0/1", False, FILTER, "bloom", gain=None,
                 params={"reference_range": [0, 1000]}),
    CatalogEntry("AVG", "Average", STATISTICAL, "Aggregate", "N:1", True, AGGREGATE, "average", gain=0.1,
                 window=WindowSpec("count", 10, 10)),
    CatalogEntry("DAC", "Distinct Approx. Count", STATISTICAL, "Transform", "1:1", True, TRANSFORM, "distinct_count"),
    CatalogEntry("KAL", "Kalman Filter", STATISTICAL, "Transform", "1:1", True, TRANSFORM, "kalman"),
    CatalogEntry("SOM", "Second Order Moment", STATISTICAL, "Transform", "1:1", True, TRANSFORM, "second_moment"),
    CatalogEntry("DTC", "Decision Tree Classify", PREDICTIVE, "Transform", "1:1", False, TRANSFORM,
                 "decision_tree", params={"model": MICRO_TREE}),
    CatalogEntry("MLR", "Multi-var. Linear Reg.", PREDICTIVE, "Transform", "1:1", False, TRANSFORM,
                 "linear_regression", params={"model": MICRO_REGRESSION}),
    CatalogEntry("SLR", "Sliding Linear Regression", PREDICTIVE, "Flat Map", "N:M", True, FLATMAP,
                 "sliding_regression", params={"window": 10, "horizon": 1}),
    CatalogEntry("ABD", "Blob Download", IO, "Source/Transform", "1:1", False, TRANSFORM, "blob_download",
                 needs="objects"),
    CatalogEntry("ABU", "Blob Upload", IO, "Sink", "1:1", False, TRANSFORM, "blob_upload", needs="objects"),
    CatalogEntry("ATQ", "Table Query", IO, "Source/Transform", "1:1", False, TRANSFORM, "table_query",
                 needs="tables"),
    CatalogEntry("MQP", "MQTT Publish", IO, "Sink", "1:1", False, TRANSFORM, "publish", needs="broker"),
]

CATALOG: dict[str, CatalogEntry] = {e.code: e for e in _ENTRIES}


def entry(code: str) -> CatalogEntry:
    try:
        return CATALOG[code.upper()]
    except KeyError:
        raise KeyError(f"unknown task code {code!r} (known: {', '.join(CATALOG)})") from None


def build_micro(
    code: str,
    *,
    rate: Optional[float] = None,
    total: Optional[int] = None,
    parallelism: int = 1,
    params: Optional[dict] = None,
    sink: str = "log_sink",
) -> Dataflow:
    """source -> task -> sink for one catalog entry.

    The source emits uniform random integers, as fast as possible unless
    ``rate`` is given. Stateful tasks are fed by value-hashed edges so that
    raising ``parallelism`` keeps a valid partitioning.
    """
    e = entry(code)
    src_params: dict = {"high": 2000 if e.code == "BLF" else MICRO_VALUE_HIGH}
    if rate is not None:
        src_params["rate"] = rate
    if total is not None:
        src_params["total"] = total
    name = e.code.lower()
    task = e.descriptor(name, parallelism, params)
    inbound = Edge.hashed("source", name, "value") if e.stateful else Edge("source", name)
    df = Dataflow(
        tasks=[
            TaskDescriptor("source", SOURCE, impl="random_integers", params=src_params),
            task,
            TaskDescriptor("sink", SINK, impl=sink),
        ],
        edges=[inbound, Edge(name, "sink")],
        name=f"micro-{e.code}",
    )
    return checked(df)


def checked(df: Dataflow) -> Dataflow:
    problems = validate(df)
    if problems:
        raise ConfigError("; ".join(str(p) for p in problems))
    return df
