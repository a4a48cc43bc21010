"""Versioned model artifacts for the predictive tasks.

A model file is a JSON document::

    {"format": "iotbench-model", "format_version": 1,
     "kind": "decision_tree", "version": 3,
     "features": ["dust", "temperature"],
     "missing": "left",
     "tree": {"attribute": "dust", "threshold": 200.0,
              "left": {"label": "good"},
              "right": {"attribute": "temperature", "threshold": 30.0,
                        "left": {"label": "average"}, "right": {"label": "poor"}}}}

    {"format": "iotbench-model", "format_version": 1,
     "kind": "linear_regression", "version": 1,
     "features": ["temperature", "humidity"], "target": "airquality_raw",
     "intercept": 1.5, "coefficients": [0.2, -0.1]}

Tree splits send ``value < threshold`` left and everything else (including
equality) right. Attributes missing from a message follow the node's
``missing`` branch, or the model-level default.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import jsonschema

FORMAT = "iotbench-model"
FORMAT_VERSION = 1

_NODE = {
    "type": "object",
    "oneOf": [
        {"required": ["label"], "properties": {"label": {"type": ["string", "number"]}}},
        {
            "required": ["attribute", "threshold", "left", "right"],
            "properties": {
                "attribute": {"type": "string"},
                "threshold": {"type": "number"},
                "missing": {"enum": ["left", "right"]},
                "left": {"$ref": "#/definitions/node"},
                "right": {"$ref": "#/definitions/node"},
            },
        },
    ],
}

SCHEMA = {
    "type": "object",
    "definitions": {"node": _NODE},
    "required": ["format", "format_version", "kind", "version", "features"],
    "properties": {
        "format": {"const": FORMAT},
        "format_version": {"const": FORMAT_VERSION},
        "kind": {"enum": ["decision_tree", "linear_regression"]},
        "version": {"type": "integer", "minimum": 0},
        "features": {"type": "array", "items": {"type": "string"}},
        "missing": {"enum": ["left", "right"]},
        "target": {"type": "string"},
        "intercept": {"type": "number"},
        "coefficients": {"type": "array", "items": {"type": "number"}},
        "tree": {"$ref": "#/definitions/node"},
    },
    "allOf": [
        {
            "if": {"properties": {"kind": {"const": "decision_tree"}}},
            "then": {"required": ["tree"]},
        },
        {
            "if": {"properties": {"kind": {"const": "linear_regression"}}},
            "then": {"required": ["intercept", "coefficients"]},
        },
    ],
}

_VALIDATOR = jsonschema.Draft7Validator(SCHEMA)


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class ModelArtifact:
    kind: str
    version: int
    features: tuple[str, ...]
    payload: dict = field(hash=False, compare=True)

    # regression ------------------------------------------------------------
    @property
    def intercept(self) -> float:
        return float(self.payload["intercept"])

    @property
    def coefficients(self) -> tuple[float, ...]:
        return tuple(float(c) for c in self.payload["coefficients"])

    @property
    def target(self) -> Optional[str]:
        return self.payload.get("target")

    # tree ------------------------------------------------------------------
    @property
    def tree(self) -> dict:
        return self.payload["tree"]

    @property
    def missing(self) -> str:
        return self.payload.get("missing", "left")

    def to_dict(self) -> dict:
        d = {"format": FORMAT, "format_version": FORMAT_VERSION, "kind": self.kind,
             "version": self.version, "features": list(self.features)}
        d.update({k: v for k, v in self.payload.items() if k not in d})
        return d

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def with_version(self, version: int) -> "ModelArtifact":
        return ModelArtifact(self.kind, version, self.features, self.payload)

    @classmethod
    def from_dict(cls, doc: dict, schema_fields: Optional[list[str]] = None) -> "ModelArtifact":
        errors = sorted(_VALIDATOR.iter_errors(doc), key=lambda e: list(e.path))
        if errors:
            raise ModelError("invalid model document: " + "; ".join(e.message for e in errors[:3]))
        features = tuple(doc["features"])
        payload = {k: v for k, v in doc.items() if k not in ("format", "format_version", "kind", "version", "features")}
        art = cls(doc["kind"], int(doc["version"]), features, payload)
        art._check(schema_fields)
        return art

    @classmethod
    def loads(cls, text: str | bytes, schema_fields: Optional[list[str]] = None) -> "ModelArtifact":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ModelError(f"model document is not JSON: {exc}") from exc
        return cls.from_dict(doc, schema_fields)

    @classmethod
    def load(cls, path, schema_fields: Optional[list[str]] = None) -> "ModelArtifact":
        return cls.loads(Path(path).read_text(encoding="utf-8"), schema_fields)

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text(self.dumps(), encoding="utf-8")
        return path

    def _check(self, schema_fields: Optional[list[str]]) -> None:
        if self.kind == "linear_regression":
            if len(self.payload["coefficients"]) != len(self.features):
                raise ModelError("coefficient count does not match the feature list")
        else:
            for attr in _tree_attributes(self.tree):
                if attr not in self.features:
                    raise ModelError(f"tree splits on {attr!r}, which is not a declared feature")
        if schema_fields is not None:
            unknown = [f for f in self.features if f not in schema_fields]
            if unknown:
                raise ModelError(f"features not in input schema: {unknown}")


def _tree_attributes(node: dict):
    stack = [node]
    while stack:
        n = stack.pop()
        if "label" in n:
            continue
        yield n["attribute"]
        stack.append(n["left"])
        stack.append(n["right"])


def decision_tree(version: int, tree: dict, features, missing: str = "left") -> ModelArtifact:
    return ModelArtifact.from_dict({"format": FORMAT, "format_version": FORMAT_VERSION, "kind": "decision_tree",
                                    "version": version, "features": list(features), "missing": missing,
                                    "tree": tree})


def linear_regression(version: int, intercept: float, coefficients, features, target: Optional[str] = None) -> ModelArtifact:
    doc: dict[str, Any] = {"format": FORMAT, "format_version": FORMAT_VERSION, "kind": "linear_regression",
                           "version": version, "features": list(features), "intercept": float(intercept),
                           "coefficients": [float(c) for c in coefficients]}
    if target:
        doc["target"] = target
    return ModelArtifact.from_dict(doc)
