"""Static SVG charts for reports: box plots and time series."""

from __future__ import annotations

import math
from typing import Sequence
from xml.sax.saxutils import escape

from ..tasks.chart import line_chart

WIDTH, HEIGHT, MARGIN = 480, 360, 50


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def box_plot(summaries: dict[str, Sequence[float]], title: str = "", unit: str = "") -> bytes:
    """One box per entry; each value is (min, q1, median, q3, max)."""
    names = sorted(summaries)
    finite = [v for n in names for v in summaries[n] if math.isfinite(v)]
    lo = min(finite) if finite else 0.0
    hi = max(finite) if finite else 1.0
    if hi == lo:
        lo, hi = lo - 1.0, hi + 1.0
    plot_h = HEIGHT - 2 * MARGIN
    slot = (WIDTH - 2 * MARGIN) / max(1, len(names))

    def y(v: float) -> str:
        return _fmt(MARGIN + plot_h * (1 - (v - lo) / (hi - lo)))

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{MARGIN}" y="20" font-family="sans-serif" font-size="14">{escape(title)}</text>',
        f'<text x="4" y="{MARGIN}" font-family="sans-serif" font-size="10">{_fmt(hi)}{escape(unit)}</text>',
        f'<text x="4" y="{HEIGHT - MARGIN}" font-family="sans-serif" font-size="10">{_fmt(lo)}{escape(unit)}</text>',
    ]
    for i, name in enumerate(names):
        vals = summaries[name]
        if len(vals) != 5 or not all(math.isfinite(v) for v in vals):
            continue
        mn, q1, med, q3, mx = vals
        cx = MARGIN + slot * (i + 0.5)
        half = slot * 0.25
        parts.append(
            f'<g data-name="{escape(name)}">'
            f'<line x1="{_fmt(cx)}" y1="{y(mn)}" x2="{_fmt(cx)}" y2="{y(q1)}" stroke="black"/>'
            f'<line x1="{_fmt(cx)}" y1="{y(q3)}" x2="{_fmt(cx)}" y2="{y(mx)}" stroke="black"/>'
            f'<rect x="{_fmt(cx - half)}" y="{y(q3)}" width="{_fmt(2 * half)}" '
            f'height="{_fmt(float(y(q1)) - float(y(q3)))}" fill="#9ecae1" stroke="black"/>'
            f'<line x1="{_fmt(cx - half)}" y1="{y(med)}" x2="{_fmt(cx + half)}" y2="{y(med)}" stroke="#d62728"/>'
            f'<text x="{_fmt(cx)}" y="{HEIGHT - MARGIN + 16}" text-anchor="middle" font-family="sans-serif" '
            f'font-size="10">{escape(name)}</text></g>'
        )
    parts.append("</svg>")
    return ("\n".join(parts) + "\n").encode("utf-8")


def series_chart(series: dict[str, Sequence[float]], title: str = "") -> bytes:
    return line_chart(series, title)
