"""Benchmark dataflows: the micro-benchmark catalog and the STATS and PRED applications."""

from .apps import (
    PROXY_CODES,
    build_pred,
    build_stats,
    fit_regression,
    fixture_tree,
    prepare_pred,
    publish_model,
    swap_model,
)
from .catalog import CATALOG, CatalogEntry, build_micro, checked, entry

APPLICATIONS = ("STATS", "PRED")


def build_app(app: str, dataset: str, fixture: str, **kwargs):
    builders = {"STATS": build_stats, "PRED": build_pred}
    try:
        return builders[app.upper()](dataset, fixture, **kwargs)
    except KeyError:
        raise KeyError(f"unknown application {app!r} (known: {', '.join(APPLICATIONS)})") from None


__all__ = [
    "APPLICATIONS",
    "PROXY_CODES",
    "CATALOG",
    "CatalogEntry",
    "build_app",
    "build_micro",
    "build_pred",
    "build_stats",
    "checked",
    "entry",
    "fit_regression",
    "fixture_tree",
    "prepare_pred",
    "publish_model",
    "swap_model",
]
