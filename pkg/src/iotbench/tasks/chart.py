"""Deterministic SVG line charts."""

from __future__ import annotations

import math
from collections import defaultdict
from typing import Iterable, Optional, Sequence
from xml.sax.saxutils import escape

WIDTH, HEIGHT, MARGIN = 640, 360, 40
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf", "#7f7f7f")


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def line_chart(series: dict[str, Sequence[float]], title: str = "") -> bytes:
    """One polyline per series, x = sample index. Series are drawn in key order."""
    finite = [v for vals in series.values() for v in vals if math.isfinite(v)]
    lo = min(finite) if finite else 0.0
    hi = max(finite) if finite else 1.0
    if hi == lo:
        lo, hi = lo - 1.0, hi + 1.0
    plot_w = WIDTH - 2 * MARGIN
    plot_h = HEIGHT - 2 * MARGIN
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
    ]
    if title:
        parts.append(f'<text x="{MARGIN}" y="20" font-family="sans-serif" font-size="14">{escape(title)}</text>')
    parts.append(
        f'<text x="4" y="{MARGIN}" font-family="sans-serif" font-size="10">{_fmt(hi)}</text>'
        f'<text x="4" y="{HEIGHT - MARGIN}" font-family="sans-serif" font-size="10">{_fmt(lo)}</text>'
    )
    for i, name in enumerate(sorted(series)):
        vals = [v for v in series[name]]
        n = len(vals)
        pts = []
        for k, v in enumerate(vals):
            if not math.isfinite(v):
                continue
            x = MARGIN + (plot_w * k / (n - 1) if n > 1 else plot_w / 2)
            y = MARGIN + plot_h * (1 - (v - lo) / (hi - lo))
            pts.append(f"{_fmt(x)},{_fmt(y)}")
        colour = PALETTE[i % len(PALETTE)]
        parts.append(
            f'<polyline data-group="{escape(str(name))}" fill="none" stroke="{colour}" '
            f'stroke-width="1.5" points="{" ".join(pts)}"/>'
        )
    parts.append("</svg>")
    return ("\n".join(parts) + "\n").encode("utf-8")


def emit_chart(window: Iterable[tuple[str, float]], title: str = "") -> bytes:
    """Render (group, value) pairs as one polyline per group."""
    series: dict[str, list[float]] = defaultdict(list)
    for group, value in window:
        series[str(group)].append(float(value))
    if not series:
        raise ValueError("empty chart window")
    return line_chart(series, title)


class ChartTask:
    """Collect ``window`` values per group and emit an SVG document for each full window.

    The value plotted for a group comes from ``value_fields[group]`` when given,
    else ``value_field``. Non-numeric values (class labels) are plotted as the
    index of the label in order of first appearance within the group.
    """

    def __init__(self, window: int = 100, group_field: str = "group", value_field: str = "value",
                 value_fields: Optional[dict] = None) -> None:
        if window < 1:
            raise ValueError("window must be >= 1")
        self.window = window
        self.group_field = group_field
        self.value_field = value_field
        self.value_fields = dict(value_fields or {})
        self._buf: dict = defaultdict(list)
        self._seq: dict = defaultdict(int)
        self._labels: dict = defaultdict(dict)

    def _value(self, g, v) -> float:
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            if v is None:
                return math.nan
            codes = self._labels[g]
            return float(codes.setdefault(v, len(codes)))
        return float(v)

    def process(self, msg, emit) -> None:
        g = msg.fields.get(self.group_field, msg.key)
        buf = self._buf[g]
        buf.append(self._value(g, msg.fields.get(self.value_fields.get(g, self.value_field))))
        if len(buf) >= self.window:
            doc = emit_chart([(g, v) for v in buf], title=str(g))
            seq = self._seq[g]
            self._seq[g] = seq + 1
            emit(msg.derive({"group": g, "seq": seq, "points": len(buf), "chart": doc}))
            buf.clear()
