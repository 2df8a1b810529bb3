"""Minimal SVG line plots for energy traces (no plotting dependency)."""
from __future__ import annotations

import math
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")
W, H = 640, 420
LEFT, RIGHT, TOP, BOTTOM = 70, 20, 40, 50


def _ticks(lo: float, hi: float, log: bool) -> list[float]:
    if log:
        return [10.0**k for k in range(math.floor(lo), math.ceil(hi) + 1)]
    step = 10 ** math.floor(math.log10(max(hi - lo, 1e-300)))
    if (hi - lo) / step < 3:
        step /= 2
    return list(np.arange(math.ceil(lo / step) * step, hi + step * 1e-9, step))


def write_line_plot(path, series: dict, title: str = "", xlabel: str = "", ylabel: str = "",
                    logx: bool = False, logy: bool = False) -> None:
    """Write ``{label: (x, y)}`` as an SVG line chart; non-positive values are dropped on log axes."""
    clean = {}
    for label, (x, y) in series.items():
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        keep = np.isfinite(x) & np.isfinite(y)
        if logx:
            keep &= x > 0
        if logy:
            keep &= y > 0
        if keep.any():
            clean[label] = (np.log10(x[keep]) if logx else x[keep],
                            np.log10(y[keep]) if logy else y[keep])
    if clean:
        xs = np.concatenate([v[0] for v in clean.values()])
        ys = np.concatenate([v[1] for v in clean.values()])
        x0, x1, y0, y1 = xs.min(), xs.max(), ys.min(), ys.max()
    else:
        x0, x1, y0, y1 = 0.0, 1.0, 0.0, 1.0
    if x1 == x0:
        x1 = x0 + 1
    if y1 == y0:
        y1 = y0 + 1
    pw, ph = W - LEFT - RIGHT, H - TOP - BOTTOM

    def px(v):
        return LEFT + (v - x0) / (x1 - x0) * pw

    def py(v):
        return TOP + (y1 - v) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="11">',
           f'<rect width="{W}" height="{H}" fill="white"/>',
           f'<text x="{W / 2}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>',
           f'<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']
    for tv in _ticks(x0, x1, logx):
        v = math.log10(tv) if logx else tv
        if x0 - 1e-9 <= v <= x1 + 1e-9:
            out.append(f'<text x="{px(v):.1f}" y="{TOP + ph + 15}" text-anchor="middle">{tv:g}</text>')
    for tv in _ticks(y0, y1, logy):
        v = math.log10(tv) if logy else tv
        if y0 - 1e-9 <= v <= y1 + 1e-9:
            out.append(f'<text x="{LEFT - 5}" y="{py(v) + 4:.1f}" text-anchor="end">{tv:g}</text>')
            out.append(f'<line x1="{LEFT}" x2="{LEFT + pw}" y1="{py(v):.1f}" y2="{py(v):.1f}" '
                       'stroke="#ddd"/>')
    out.append(f'<text x="{LEFT + pw / 2}" y="{H - 10}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="15" y="{TOP + ph / 2}" text-anchor="middle" '
               f'transform="rotate(-90 15 {TOP + ph / 2})">{escape(ylabel)}</text>')
    for i, (label, (x, y)) in enumerate(clean.items()):
        color = _COLORS[i % len(_COLORS)]
        pts = " ".join(f"{px(a):.1f},{py(b):.1f}" for a, b in zip(x, y))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        ly = TOP + 15 + 15 * i
        out.append(f'<line x1="{LEFT + pw - 140}" x2="{LEFT + pw - 120}" y1="{ly}" y2="{ly}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{LEFT + pw - 115}" y="{ly + 4}">{escape(str(label))}</text>')
    out.append("</svg>")
    Path(path).write_text("\n".join(out) + "\n", encoding="utf-8")
