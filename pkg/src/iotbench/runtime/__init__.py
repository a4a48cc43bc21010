"""Minimal in-process dataflow engine."""

from .engine import (
    DEFAULT_QUEUE_CAPACITY,
    BoundedQueue,
    InstanceContext,
    RunHandle,
    SourceContext,
    StartupError,
    run,
    stable_hash,
    start,
)
from .model import (
    AGGREGATE,
    DUPLICATE,
    FILTER,
    FLATMAP,
    HASH,
    ONE_TO_ONE,
    ROUND_ROBIN,
    SINK,
    SOURCE,
    TRANSFORM,
    Dataflow,
    Edge,
    Message,
    Selectivity,
    TaskDescriptor,
    WindowSpec,
)
from .telemetry import Telemetry
from .validate import Violation, validate
from .window import Windower, apply_window

__all__ = [
    "AGGREGATE",
    "DEFAULT_QUEUE_CAPACITY",
    "DUPLICATE",
    "FILTER",
    "FLATMAP",
    "HASH",
    "ONE_TO_ONE",
    "ROUND_ROBIN",
    "SINK",
    "SOURCE",
    "TRANSFORM",
    "BoundedQueue",
    "Dataflow",
    "Edge",
    "InstanceContext",
    "Message",
    "RunHandle",
    "Selectivity",
    "SourceContext",
    "StartupError",
    "TaskDescriptor",
    "Telemetry",
    "Violation",
    "WindowSpec",
    "Windower",
    "apply_window",
    "run",
    "stable_hash",
    "start",
    "validate",
]
