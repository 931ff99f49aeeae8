"""Minimal log-log line charts written as standalone SVG."""

from __future__ import annotations

import math
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")


def loglog_svg(series: Sequence[tuple], title: str = "", xlabel: str = "n", ylabel: str = "",
               width: int = 640, height: int = 420) -> str:
    """Render ``(label, xs, ys)`` series on log-log axes; nonpositive points are dropped."""
    clean = []
    for label, xs, ys in series:
        xs, ys = np.asarray(xs, dtype=float), np.asarray(ys, dtype=float)
        ok = (xs > 0) & (ys > 0) & np.isfinite(xs) & np.isfinite(ys)
        if ok.any():
            clean.append((label, np.log10(xs[ok]), np.log10(ys[ok])))
    if not clean:
        raise ValueError("nothing positive to plot")
    lx = np.concatenate([c[1] for c in clean])
    ly = np.concatenate([c[2] for c in clean])
    x0, x1 = math.floor(lx.min()), math.ceil(lx.max())
    y0, y1 = math.floor(ly.min()), math.ceil(ly.max())
    x1, y1 = max(x1, x0 + 1), max(y1, y0 + 1)
    left, right, top, bottom = 70, 20, 40, 50
    pw, ph = width - left - right, height - top - bottom

    def px(v):
        return left + (v - x0) / (x1 - x0) * pw

    def py(v):
        return top + (y1 - v) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
           f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
           f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']
    for d in range(x0, x1 + 1):
        out.append(f'<line x1="{px(d):.2f}" y1="{top}" x2="{px(d):.2f}" y2="{top + ph}" stroke="#ddd"/>')
        out.append(f'<text x="{px(d):.2f}" y="{top + ph + 18}" text-anchor="middle">1e{d}</text>')
    for d in range(y0, y1 + 1):
        out.append(f'<line x1="{left}" y1="{py(d):.2f}" x2="{left + pw}" y2="{py(d):.2f}" stroke="#ddd"/>')
        out.append(f'<text x="{left - 6}" y="{py(d) + 4:.2f}" text-anchor="end">1e{d}</text>')
    for i, (label, xs, ys) in enumerate(clean):
        color = PALETTE[i % len(PALETTE)]
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(xs, ys))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        out.append(f'<text x="{left + 10}" y="{top + 16 + 16 * i}" fill="{color}">{escape(label)}</text>')
    out.append(f'<text x="{width / 2:.1f}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>')
    out.append(f'<text x="{left + pw / 2:.1f}" y="{height - 10}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="16" y="{top + ph / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {top + ph / 2:.1f})">{escape(ylabel)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
