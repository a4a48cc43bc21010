"""Decision-tree classification and multi-variate linear regression (transform 1:1).

Both tasks accept in-band control messages carrying a newer ModelArtifact;
the swap takes effect for the very next data message.
"""

from __future__ import annotations

import math
from typing import Optional, Sequence

from .models import ModelArtifact


def _number(v) -> Optional[float]:
    if isinstance(v, bool):
        return None
    if isinstance(v, (int, float)):
        return None if isinstance(v, float) and math.isnan(v) else v
    try:
        return float(v)
    except (TypeError, ValueError):
        return None


def classify(model: ModelArtifact, fields: dict) -> tuple[object, int]:
    """Walk the tree; returns (label, number of splits that hit a missing value)."""
    node = model.tree
    default = model.missing
    missing = 0
    while "label" not in node:
        v = _number(fields.get(node["attribute"]))
        if v is None:
            missing += 1
            side = node.get("missing", default)
        else:
            side = "left" if v < node["threshold"] else "right"
        node = node[side]
    return node["label"], missing


def predict(model: ModelArtifact, fields: dict) -> Optional[float]:
    """beta_0 + sum(beta_j * x_j); None when a feature is absent or non-numeric."""
    acc = model.intercept
    for name, beta in zip(model.features, model.coefficients):
        x = _number(fields.get(name))
        if x is None:
            return None
        acc += beta * x
    return acc


class ModelTask:
    kind = ""

    def __init__(self, model: ModelArtifact, counters=None, samples: Optional[Sequence[dict]] = None,
                 sample_field: str = "value") -> None:
        if model.kind != self.kind:
            raise ValueError(f"{type(self).__name__} needs a {self.kind} model, got {model.kind}")
        self.model = model
        self.counters = counters if counters is not None else {}
        self.samples = list(samples) if samples else None
        self.sample_field = sample_field
        self.processed = 0
        self.swap_log: list[tuple[int, int]] = []  # (data messages before swap, new version)

    @property
    def version(self) -> int:
        return self.model.version

    def _bump(self, name: str) -> None:
        self.counters[name] = self.counters.get(name, 0) + 1

    def swap_model(self, artifact: ModelArtifact) -> bool:
        """Install ``artifact`` if it is the right kind and strictly newer."""
        if artifact.kind != self.kind:
            self._bump("model_kind_mismatch")
            return False
        if artifact.version <= self.model.version:
            self._bump("stale_model")
            return False
        self.model = artifact
        self.swap_log.append((self.processed, artifact.version))
        return True

    def _fields(self, msg) -> dict:
        if self.samples is not None:
            v = msg.fields.get(self.sample_field)
            if isinstance(v, int):
                return self.samples[v % len(self.samples)]
        return msg.fields

    def process(self, msg, emit) -> None:
        if msg.control is not None:
            art = msg.control
            # artifacts for other prediction tasks share the control stream
            if isinstance(art, ModelArtifact) and art.kind == self.kind:
                self.swap_model(art)
            return
        self.processed += 1
        self._predict(msg, emit)

    def _predict(self, msg, emit) -> None:
        raise NotImplementedError


class DecisionTreeTask(ModelTask):
    kind = "decision_tree"

    def _predict(self, msg, emit) -> None:
        model = self.model
        label, missing = classify(model, self._fields(msg))
        if missing:
            self._bump("missing_attribute")
        emit(msg.derive({"stat": "dtc", "label": label, "model_version": model.version}))


class LinearRegressionTask(ModelTask):
    kind = "linear_regression"

    def _predict(self, msg, emit) -> None:
        model = self.model
        fields = self._fields(msg)
        yhat = predict(model, fields)
        if yhat is None:
            self._bump("missing_feature")
            return
        out = {"stat": "mlr", "prediction": yhat, "model_version": model.version}
        target = model.target
        if target and target in fields:
            out["observed"] = fields[target]
        emit(msg.derive(out))


def decision_tree_classify(model: ModelArtifact, message) -> object:
    return classify(model, message.fields)[0]


def mlr_predict(model: ModelArtifact, message) -> Optional[float]:
    return predict(model, message.fields)
