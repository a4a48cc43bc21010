"""Input streams: CSV replay, synthetic rate shapes, dataset fixtures."""

from .datasets import (
    DatasetProfile,
    FixtureInfo,
    descriptor,
    ensure_fixture,
    profile,
    reference_set,
    synthesize_fixture,
)
from .replay import LoadedRows, ReplaySource, load_rows, replay
from .spec import (
    Attribute,
    Bimodal,
    Burst,
    Normal,
    RateMode,
    Sawtooth,
    Schema,
    StreamSourceSpec,
    Uniform,
)
from .synthetic import RandomIntegerSource, SyntheticSource, random_integers, synthesize

__all__ = [
    "Attribute",
    "Bimodal",
    "Burst",
    "DatasetProfile",
    "FixtureInfo",
    "LoadedRows",
    "Normal",
    "RandomIntegerSource",
    "RateMode",
    "ReplaySource",
    "Sawtooth",
    "Schema",
    "StreamSourceSpec",
    "SyntheticSource",
    "Uniform",
    "descriptor",
    "ensure_fixture",
    "load_rows",
    "profile",
    "random_integers",
    "reference_set",
    "replay",
    "synthesize",
    "synthesize_fixture",
]
