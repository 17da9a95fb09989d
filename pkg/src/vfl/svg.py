"""Minimal self-contained SVG line plots with deterministic output."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

W, H = 480, 360
ML, MR, MT, MB = 70, 20, 40, 50


def _fmt(v: float) -> str:
    return f"{v:.6g}"


def _ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    return [lo + (hi - lo) * k / (count - 1) for k in range(count)]


def line_plot(series, title: str, xlabel: str, ylabel: str, loglog: bool = False,
              notes: list[str] | None = None) -> str:
    """series: list of (label, xs, ys, show_markers)."""
    tx = (lambda v: math.log10(v)) if loglog else (lambda v: v)
    pts = [(tx(x), tx(y)) for _, xs, ys, _ in series for x, y in zip(xs, ys)]
    xs_all = [p[0] for p in pts] or [0.0, 1.0]
    ys_all = [p[1] for p in pts] or [0.0, 1.0]
    x0, x1 = min(xs_all), max(xs_all)
    y0, y1 = min(ys_all), max(ys_all)
    if x1 == x0:
        x0, x1 = x0 - 1, x1 + 1
    if y1 == y0:
        y0, y1 = y0 - 1, y1 + 1
    pad = 0.05 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad

    def px(v):
        return ML + (v - x0) / (x1 - x0) * (W - ML - MR)

    def py(v):
        return H - MB - (v - y0) / (y1 - y0) * (H - MT - MB)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
           f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
           f'<text x="{W / 2}" y="22" text-anchor="middle" font-family="sans-serif" font-size="14">{escape(title)}</text>',
           f'<line x1="{ML}" y1="{H - MB}" x2="{W - MR}" y2="{H - MB}" stroke="black"/>',
           f'<line x1="{ML}" y1="{MT}" x2="{ML}" y2="{H - MB}" stroke="black"/>']
    for v in _ticks(x0, x1):
        lab = _fmt(10 ** v) if loglog else _fmt(v)
        out.append(f'<text x="{_fmt(px(v))}" y="{H - MB + 16}" text-anchor="middle" font-family="sans-serif" font-size="10">{lab}</text>')
    for v in _ticks(y0, y1):
        lab = _fmt(10 ** v) if loglog else _fmt(v)
        out.append(f'<text x="{ML - 6}" y="{_fmt(py(v) + 3)}" text-anchor="end" font-family="sans-serif" font-size="10">{lab}</text>')
    out.append(f'<text x="{W / 2}" y="{H - 12}" text-anchor="middle" font-family="sans-serif" font-size="12">{escape(xlabel)}</text>')
    out.append(f'<text x="16" y="{H / 2}" text-anchor="middle" font-family="sans-serif" font-size="12" '
               f'transform="rotate(-90 16 {H / 2})">{escape(ylabel)}</text>')
    colors = ["#1f5fa8", "#c0392b", "#2e8b57", "#8e44ad"]
    for k, (label, xs, ys, markers) in enumerate(series):
        col = colors[k % len(colors)]
        coords = " ".join(f"{_fmt(px(tx(x)))},{_fmt(py(tx(y)))}" for x, y in zip(xs, ys))
        if len(xs) > 1:
            out.append(f'<polyline points="{coords}" fill="none" stroke="{col}" stroke-width="1.5"/>')
        if markers:
            for x, y in zip(xs, ys):
                out.append(f'<circle cx="{_fmt(px(tx(x)))}" cy="{_fmt(py(tx(y)))}" r="3" fill="{col}"/>')
        out.append(f'<text x="{W - MR - 4}" y="{MT + 14 * (k + 1)}" text-anchor="end" font-family="sans-serif" '
                   f'font-size="11" fill="{col}">{escape(label)}</text>')
    for k, note in enumerate(notes or []):
        out.append(f'<text x="{ML + 8}" y="{MT + 14 * (k + 1)}" font-family="sans-serif" font-size="11">{escape(note)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
