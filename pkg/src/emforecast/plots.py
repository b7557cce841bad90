"""Minimal static SVG line chart for history plus forecast."""
from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT, PAD = 720, 360, 48


def line_chart_svg(years, values, split_index: int, title: str = "", y_label: str = "") -> str:
    """One polyline over all points; a dashed marker separates observed from forecast."""
    x = np.asarray(years, dtype=np.float64)
    y = np.asarray(values, dtype=np.float64)
    if x.size != y.size or x.size == 0:
        raise ValueError("years and values must be non-empty and equal length")
    x0, x1 = float(x.min()), float(x.max())
    y0, y1 = float(y.min()), float(y.max())
    xs = (x - x0) / ((x1 - x0) or 1.0) * (WIDTH - 2 * PAD) + PAD
    ys = HEIGHT - PAD - (y - y0) / ((y1 - y0) or 1.0) * (HEIGHT - 2 * PAD)
    points = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(xs, ys))
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.0f}" y="24" text-anchor="middle" font-size="15">{escape(title)}</text>',
        f'<line x1="{PAD}" y1="{HEIGHT - PAD}" x2="{WIDTH - PAD}" y2="{HEIGHT - PAD}" stroke="black"/>',
        f'<line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{HEIGHT - PAD}" stroke="black"/>',
        f'<text x="{PAD}" y="{HEIGHT - PAD + 18}" font-size="11">{int(x0)}</text>',
        f'<text x="{WIDTH - PAD}" y="{HEIGHT - PAD + 18}" font-size="11" text-anchor="end">{int(x1)}</text>',
        f'<text x="{PAD - 4}" y="{HEIGHT - PAD}" font-size="11" text-anchor="end">{y0:.2f}</text>',
        f'<text x="{PAD - 4}" y="{PAD + 4}" font-size="11" text-anchor="end">{y1:.2f}</text>',
        f'<text x="14" y="{HEIGHT / 2:.0f}" font-size="11" transform="rotate(-90 14 {HEIGHT / 2:.0f})" text-anchor="middle">{escape(y_label)}</text>',
    ]
    if 0 < split_index < x.size:
        sx = 0.5 * (xs[split_index - 1] + xs[split_index])
        parts.append(f'<line x1="{sx:.2f}" y1="{PAD}" x2="{sx:.2f}" y2="{HEIGHT - PAD}" stroke="grey" stroke-dasharray="4 4"/>')
    parts.append(f'<polyline fill="none" stroke="steelblue" stroke-width="2" points="{points}"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
