"""Minimal SVG line and bar charts (no plotting dependency)."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")


@dataclass
class Line:
    x: np.ndarray
    y: np.ndarray
    label: str = ""
    color: str = ""
    dashed: bool = False


@dataclass
class Panel:
    lines: list = field(default_factory=list)
    title: str = ""
    xlabel: str = ""
    ylabel: str = ""
    logy: bool = False
    bars: tuple = ()  # (lefts, rights, heights)


def _ticks(lo, hi, n=5):
    if hi <= lo:
        return [lo]
    return list(np.linspace(lo, hi, n))


def _panel_svg(panel: Panel, x0, y0, w, h):
    out = []
    xs, ys = [], []
    for ln in panel.lines:
        ok = np.isfinite(ln.x) & np.isfinite(ln.y)
        if panel.logy:
            ok &= ln.y > 0
        xs.append(ln.x[ok])
        ys.append(np.log10(ln.y[ok]) if panel.logy else ln.y[ok])
    if panel.bars:
        left, right, height = (np.asarray(v, dtype=float) for v in panel.bars)
        xs += [left, right]
        ys += [np.zeros(1), height]
    xs = np.concatenate(xs) if xs else np.zeros(1)
    ys = np.concatenate(ys) if ys else np.zeros(1)
    if xs.size == 0:
        xs = np.zeros(1)
    if ys.size == 0:
        ys = np.zeros(1)
    xlo, xhi = float(xs.min()), float(xs.max())
    ylo, yhi = float(ys.min()), float(ys.max())
    if xhi == xlo:
        xhi = xlo + 1
    if yhi == ylo:
        yhi = ylo + 1
    pad = 0.05 * (yhi - ylo)
    ylo, yhi = ylo - pad, yhi + pad

    def px(v):
        return x0 + (v - xlo) / (xhi - xlo) * w

    def py(v):
        return y0 + h - (v - ylo) / (yhi - ylo) * h

    out.append(f'<rect x="{x0}" y="{y0}" width="{w}" height="{h}" fill="none" stroke="#444"/>')
    for v in _ticks(xlo, xhi):
        out.append(f'<text x="{px(v):.1f}" y="{y0 + h + 14}" font-size="10" text-anchor="middle">{v:.4g}</text>')
    for v in _ticks(ylo, yhi):
        label = f"{10**v:.3g}" if panel.logy else f"{v:.3g}"
        out.append(f'<text x="{x0 - 4}" y="{py(v) + 3:.1f}" font-size="10" text-anchor="end">{label}</text>')
    if panel.bars:
        left, right, height = (np.asarray(v, dtype=float) for v in panel.bars)
        for a, b, c in zip(left, right, height):
            if c > 0:
                out.append(f'<rect x="{px(a):.1f}" y="{py(c):.1f}" width="{max(px(b) - px(a), 0.5):.1f}" '
                           f'height="{py(0) - py(c):.1f}" fill="{PALETTE[0]}" opacity="0.7"/>')
    for i, ln in enumerate(panel.lines):
        ok = np.isfinite(ln.x) & np.isfinite(ln.y)
        y = ln.y
        if panel.logy:
            ok &= ln.y > 0
            y = np.where(ok, np.log10(np.where(ok, ln.y, 1.0)), np.nan)
        if not ok.any():
            continue
        step = max(1, int(ok.sum() // 2000))
        pts = " ".join(f"{px(a):.1f},{py(b):.1f}" for a, b in zip(ln.x[ok][::step], y[ok][::step]))
        color = ln.color or PALETTE[i % len(PALETTE)]
        dash = ' stroke-dasharray="5,4"' if ln.dashed else ""
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1"{dash}/>')
        if ln.label:
            out.append(f'<text x="{x0 + w - 4}" y="{y0 + 14 + 12 * i}" font-size="10" fill="{color}" '
                       f'text-anchor="end">{escape(ln.label)}</text>')
    out.append(f'<text x="{x0 + w / 2}" y="{y0 - 6}" font-size="12" text-anchor="middle">{escape(panel.title)}</text>')
    out.append(f'<text x="{x0 + w / 2}" y="{y0 + h + 28}" font-size="10" text-anchor="middle">{escape(panel.xlabel)}</text>')
    out.append(f'<text x="{x0 - 44}" y="{y0 + h / 2}" font-size="10" text-anchor="middle" '
               f'transform="rotate(-90 {x0 - 44} {y0 + h / 2})">{escape(panel.ylabel)}</text>')
    return out


def render(path, panels, width=720, panel_height=220) -> Path:
    margin_l, margin_t, gap = 64, 28, 56
    h_total = margin_t + len(panels) * (panel_height + gap)
    body = []
    for k, panel in enumerate(panels):
        body += _panel_svg(panel, margin_l, margin_t + k * (panel_height + gap), width - margin_l - 20, panel_height)
    svg = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{math.ceil(h_total)}" '
           f'font-family="sans-serif">\n<rect width="100%" height="100%" fill="white"/>\n'
           + "\n".join(body) + "\n</svg>\n")
    path = Path(path)
    path.write_text(svg, encoding="utf-8")
    return path
