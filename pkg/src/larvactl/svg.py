"""Minimal deterministic SVG line charts.

Coordinates are written with fixed precision and no timestamps, so the same
input always produces byte-identical files.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Mapping, Sequence
from xml.sax.saxutils import escape

import numpy as np

from .errors import ScenarioError

WIDTH, HEIGHT = 720, 420
MARGIN = {"left": 70, "right": 150, "top": 40, "bottom": 50}
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f")


def _nice_ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step) * step
    return [start + k * step for k in range(int((hi - start) / step + 1e-9) + 1)]


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def render_svg(columns: Mapping[str, Sequence[float]], channels: Sequence[str], *,
               x: str = "t", title: str = "", x_label: str | None = None,
               y_label: str = "") -> str:
    if not channels:
        raise ScenarioError("no channels to plot")
    if x not in columns:
        raise ScenarioError(f"missing abscissa column {x!r}")
    xs = np.asarray(columns[x], dtype=float)
    if xs.size == 0:
        raise ScenarioError("cannot plot an empty series")
    missing = [c for c in channels if c not in columns]
    if missing:
        raise ScenarioError(f"unknown channels {missing}; available: {sorted(columns)}")
    ys = {c: np.asarray(columns[c], dtype=float) for c in channels}
    finite = np.concatenate([v[np.isfinite(v)] for v in ys.values()] or [np.zeros(0)])
    y_lo, y_hi = (float(finite.min()), float(finite.max())) if finite.size else (0.0, 1.0)
    if y_hi - y_lo < 1e-12 * max(1.0, abs(y_hi)):
        y_lo, y_hi = y_lo - 0.5, y_hi + 0.5
    x_lo, x_hi = float(xs.min()), float(xs.max())
    if x_hi == x_lo:
        x_hi = x_lo + 1.0

    left, top = MARGIN["left"], MARGIN["top"]
    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def px(v):
        return left + (v - x_lo) / (x_hi - x_lo) * pw

    def py(v):
        return top + (y_hi - v) / (y_hi - y_lo) * ph

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for v in _nice_ticks(x_lo, x_hi):
        X = _fmt(px(v))
        out.append(f'<line x1="{X}" y1="{top + ph}" x2="{X}" y2="{top + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{X}" y="{top + ph + 18}" font-size="11" text-anchor="middle">{v:.4g}</text>')
    for v in _nice_ticks(y_lo, y_hi):
        Y = _fmt(py(v))
        out.append(f'<line x1="{left - 5}" y1="{Y}" x2="{left}" y2="{Y}" stroke="black"/>')
        out.append(f'<text x="{left - 8}" y="{Y}" font-size="11" text-anchor="end" '
                   f'dominant-baseline="middle">{v:.4g}</text>')
    out.append(f'<text x="{left + pw / 2:.1f}" y="{HEIGHT - 12}" font-size="13" '
               f'text-anchor="middle">{escape(x_label or x)}</text>')
    if y_label:
        out.append(f'<text x="16" y="{top + ph / 2:.1f}" font-size="13" text-anchor="middle" '
                   f'transform="rotate(-90 16 {top + ph / 2:.1f})">{escape(y_label)}</text>')
    if title:
        out.append(f'<text x="{left + pw / 2:.1f}" y="24" font-size="14" '
                   f'text-anchor="middle">{escape(title)}</text>')
    for k, (name, v) in enumerate(ys.items()):
        color = COLORS[k % len(COLORS)]
        ok = np.isfinite(v) & np.isfinite(xs)
        pts = " ".join(f"{_fmt(px(a))},{_fmt(py(b))}" for a, b in zip(xs[ok], v[ok]))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        ly = top + 14 + 18 * k
        out.append(f'<line x1="{left + pw + 10}" y1="{ly}" x2="{left + pw + 30}" y2="{ly}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{left + pw + 35}" y="{ly}" font-size="12" '
                   f'dominant-baseline="middle">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_svg(series, channels: Sequence[str], path, **kw) -> Path:
    """Write a line chart of ``channels`` against time.

    ``series`` is an OutputSeries or any mapping of column name to values.
    """
    columns = series.columns() if hasattr(series, "columns") else series
    text = render_svg(columns, list(channels), **kw)
    path = Path(path)
    path.write_text(text)
    return path
