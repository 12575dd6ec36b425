"""Minimal deterministic SVG line and scatter plots."""
from __future__ import annotations

import math
from dataclasses import dataclass
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf")
W, H = 640, 420
LEFT, RIGHT, TOP, BOTTOM = 70, 150, 40, 55


@dataclass
class Series:
    label: str
    x: np.ndarray
    y: np.ndarray
    style: str = "line"  # line | scatter | both


def _ticks(lo, hi, log):
    if log:
        a, b = math.floor(lo), math.ceil(hi)
        return [float(v) for v in range(a, b + 1)]
    span = hi - lo
    step = 10 ** math.floor(math.log10(span / 5)) if span > 0 else 1.0
    for m in (1, 2, 5, 10):
        if span / (step * m) <= 6:
            step *= m
            break
    first = math.ceil(lo / step) * step
    return [first + i * step for i in range(int((hi - first) / step + 1e-9) + 1)]


def _fmt(v, log):
    if log:
        return f"1e{int(v)}"
    return f"{v:.4g}"


def plot(series, title="", xlabel="", ylabel="", logx=False, logy=False, diagonal=False) -> str:
    """Render series to an SVG document string."""
    pts = []
    for s in series:
        x = np.asarray(s.x, dtype=float)
        y = np.asarray(s.y, dtype=float)
        ok = np.isfinite(x) & np.isfinite(y)
        if logx:
            ok &= x > 0
        if logy:
            ok &= y > 0
        pts.append((s, x[ok], y[ok]))
    tx = (lambda v: np.log10(v)) if logx else (lambda v: v)
    ty = (lambda v: np.log10(v)) if logy else (lambda v: v)
    allx = np.concatenate([tx(x) for _, x, _ in pts]) if pts else np.zeros(0)
    ally = np.concatenate([ty(y) for _, _, y in pts]) if pts else np.zeros(0)
    if allx.size == 0:
        allx = ally = np.array([0.0, 1.0])
    x0, x1 = float(allx.min()), float(allx.max())
    y0, y1 = float(ally.min()), float(ally.max())
    if diagonal:
        lo, hi = min(x0, y0), max(x1, y1)
        x0, x1, y0, y1 = lo, hi, lo, hi
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pw, ph = W - LEFT - RIGHT, H - TOP - BOTTOM

    def px(v):
        return LEFT + (v - x0) / (x1 - x0) * pw

    def py(v):
        return TOP + ph - (v - y0) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">',
        f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
        f'<text x="{W / 2:.1f}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for v in _ticks(x0, x1, logx):
        if x0 - 1e-12 <= v <= x1 + 1e-12:
            X = px(v)
            out.append(f'<line x1="{X:.2f}" y1="{TOP + ph}" x2="{X:.2f}" y2="{TOP + ph + 5}" stroke="black"/>')
            out.append(f'<text x="{X:.2f}" y="{TOP + ph + 18}" text-anchor="middle">{_fmt(v, logx)}</text>')
    for v in _ticks(y0, y1, logy):
        if y0 - 1e-12 <= v <= y1 + 1e-12:
            Y = py(v)
            out.append(f'<line x1="{LEFT - 5}" y1="{Y:.2f}" x2="{LEFT}" y2="{Y:.2f}" stroke="black"/>')
            out.append(f'<text x="{LEFT - 8}" y="{Y + 4:.2f}" text-anchor="end">{_fmt(v, logy)}</text>')
    out.append(f'<text x="{LEFT + pw / 2:.1f}" y="{H - 12}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="16" y="{TOP + ph / 2:.1f}" text-anchor="middle" transform="rotate(-90 16 {TOP + ph / 2:.1f})">{escape(ylabel)}</text>')
    if diagonal:
        out.append(f'<line x1="{px(x0):.2f}" y1="{py(y0):.2f}" x2="{px(x1):.2f}" y2="{py(y1):.2f}" stroke="#999" stroke-dasharray="4 3"/>')
    for i, (s, x, y) in enumerate(pts):
        c = PALETTE[i % len(PALETTE)]
        X, Y = px(tx(x)), py(ty(y))
        if s.style in ("line", "both") and X.size > 1:
            d = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(X, Y))
            out.append(f'<polyline fill="none" stroke="{c}" stroke-width="1.5" points="{d}"/>')
        if s.style in ("scatter", "both"):
            out.extend(f'<circle cx="{a:.2f}" cy="{b:.2f}" r="2.5" fill="{c}"/>' for a, b in zip(X, Y))
        ly = TOP + 14 + 16 * i
        out.append(f'<rect x="{W - RIGHT + 12}" y="{ly - 8}" width="10" height="10" fill="{c}"/>')
        out.append(f'<text x="{W - RIGHT + 28}" y="{ly + 1}">{escape(s.label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def save(path, *args, **kw) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(plot(*args, **kw))
