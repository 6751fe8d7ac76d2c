"""Minimal static SVG line charts (no plotting dependency)."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f")
WIDTH, HEIGHT = 640, 420
MARGIN = dict(left=70, right=150, top=30, bottom=50)


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step) * step
    return [start + k * step for k in range(int((hi - start) / step + 1e-9) + 1)]


def line_chart(series, xlabel: str, ylabel: str, title: str = "", logx: bool = False) -> str:
    """Render ``series = [(label, x, y), ...]`` as an SVG document string.

    Non-finite points are skipped; with ``logx`` points at ``x <= 0`` are too.
    """
    cleaned = []
    for label, x, y in series:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        ok = np.isfinite(x) & np.isfinite(y)
        if logx:
            ok &= x > 0
            x = np.where(ok, np.log10(np.where(ok, x, 1.0)), 0.0)
        cleaned.append((label, x[ok], y[ok]))
    xs = np.concatenate([c[1] for c in cleaned]) if cleaned else np.zeros(0)
    ys = np.concatenate([c[2] for c in cleaned]) if cleaned else np.zeros(0)
    x0, x1 = (float(xs.min()), float(xs.max())) if xs.size else (0.0, 1.0)
    y0, y1 = (float(ys.min()), float(ys.max())) if ys.size else (0.0, 1.0)
    if x1 == x0:
        x1 = x0 + 1.0
    pad = 0.05 * (y1 - y0 or abs(y0) or 1.0)
    y0, y1 = y0 - pad, y1 + pad
    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def px(v):
        return MARGIN["left"] + (v - x0) / (x1 - x0) * pw

    def py(v):
        return MARGIN["top"] + (y1 - v) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<rect x="{MARGIN["left"]}" y="{MARGIN["top"]}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for v in _ticks(x0, x1):
        label = f"1e{v:g}" if logx else f"{v:g}"
        out.append(f'<line x1="{px(v):.2f}" y1="{MARGIN["top"] + ph}" x2="{px(v):.2f}" '
                   f'y2="{MARGIN["top"] + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{px(v):.2f}" y="{MARGIN["top"] + ph + 18}" text-anchor="middle">{label}</text>')
    for v in _ticks(y0, y1):
        out.append(f'<line x1="{MARGIN["left"] - 5}" y1="{py(v):.2f}" x2="{MARGIN["left"]}" '
                   f'y2="{py(v):.2f}" stroke="black"/>')
        out.append(f'<text x="{MARGIN["left"] - 8}" y="{py(v) + 4:.2f}" text-anchor="end">{v:.4g}</text>')
    out.append(f'<text x="{MARGIN["left"] + pw / 2}" y="{HEIGHT - 12}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="16" y="{MARGIN["top"] + ph / 2}" text-anchor="middle" '
               f'transform="rotate(-90 16 {MARGIN["top"] + ph / 2})">{escape(ylabel)}</text>')
    if title:
        out.append(f'<text x="{MARGIN["left"] + pw / 2}" y="18" text-anchor="middle">{escape(title)}</text>')
    for k, (label, x, y) in enumerate(cleaned):
        color = COLORS[k % len(COLORS)]
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x, y))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{pts}"/>')
        ly = MARGIN["top"] + 14 + 18 * k
        lx = MARGIN["left"] + pw + 10
        out.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 20}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{lx + 26}" y="{ly + 4}">{escape(str(label))}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
