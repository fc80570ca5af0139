"""Minimal SVG renderer for mean +/- std regret curves.

Generates standalone vector graphics without any plotting dependency. A
figure is a grid of panels; each panel holds labeled curves with shaded
standard-deviation bands.
"""

from __future__ import annotations

import math

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")

PANEL_W = 320
PANEL_H = 240
MARGIN_L = 58
MARGIN_R = 12
MARGIN_T = 30
MARGIN_B = 40
GAP = 18


def _ticks(lo: float, hi: float, n: int = 5):
    if hi <= lo:
        hi = lo + 1.0
    span = hi - lo
    raw = span / max(n - 1, 1)
    mag = 10 ** math.floor(math.log10(raw))
    for mult in (1, 2, 2.5, 5, 10):
        step = mult * mag
        if span / step <= n:
            break
    first = step * math.ceil(lo / step)
    out = []
    v = first
    while v <= hi + 1e-12 * span:
        out.append(v)
        v += step
    return out


def _fmt(v: float) -> str:
    if v == 0:
        return "0"
    if abs(v) >= 10000 or abs(v) < 0.01:
        return f"{v:.1e}"
    return f"{v:g}"


class Panel:
    """One coordinate frame: title plus (label, t, mean, std) curves."""

    def __init__(self, title: str):
        self.title = title
        self.curves = []

    def add_curve(self, label, t, mean, std):
        self.curves.append((label, list(t), list(mean), list(std)))


def render_figure(panels_grid, out_path, x_label: str = "round",
                  y_label: str = "regret"):
    """Write an SVG file for a list of panel rows.

    panels_grid is a list of rows, each row a list of Panel objects. A
    legend is drawn inside each panel.
    """
    rows = len(panels_grid)
    cols = max(len(r) for r in panels_grid)
    width = cols * (PANEL_W + GAP) + GAP
    height = rows * (PANEL_H + GAP) + GAP
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        '<style>text{font-family:sans-serif;}</style>',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    for ri, row in enumerate(panels_grid):
        for ci, panel in enumerate(row):
            ox = GAP + ci * (PANEL_W + GAP)
            oy = GAP + ri * (PANEL_H + GAP)
            parts.append(_render_panel(panel, ox, oy, x_label, y_label))
    parts.append("</svg>")
    with open(out_path, "w") as fh:
        fh.write("\n".join(parts) + "\n")


def _render_panel(panel: Panel, ox: float, oy: float, x_label, y_label) -> str:
    x0, y0 = ox + MARGIN_L, oy + MARGIN_T
    iw = PANEL_W - MARGIN_L - MARGIN_R
    ih = PANEL_H - MARGIN_T - MARGIN_B

    xs = [x for _, t, _, _ in panel.curves for x in t] or [0.0, 1.0]
    ys = []
    for _, _, mean, std in panel.curves:
        ys.extend(m - s for m, s in zip(mean, std))
        ys.extend(m + s for m, s in zip(mean, std))
    if not ys:
        ys = [0.0, 1.0]
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(ys + [0.0]), max(ys)
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if y_hi == y_lo:
        y_hi = y_lo + 1.0

    def px(x):
        return x0 + (x - x_lo) / (x_hi - x_lo) * iw

    def py(y):
        return y0 + ih - (y - y_lo) / (y_hi - y_lo) * ih

    s = [f'<g><text x="{ox + PANEL_W / 2:.1f}" y="{oy + 16}" text-anchor="middle" '
         f'font-size="13">{panel.title}</text>']
    s.append(f'<rect x="{x0}" y="{y0}" width="{iw}" height="{ih}" fill="none" '
             f'stroke="#444" stroke-width="1"/>')
    for tv in _ticks(x_lo, x_hi):
        s.append(f'<line x1="{px(tv):.1f}" y1="{y0 + ih}" x2="{px(tv):.1f}" '
                 f'y2="{y0 + ih + 4}" stroke="#444"/>')
        s.append(f'<text x="{px(tv):.1f}" y="{y0 + ih + 16}" text-anchor="middle" '
                 f'font-size="10">{_fmt(tv)}</text>')
    for tv in _ticks(y_lo, y_hi):
        s.append(f'<line x1="{x0 - 4}" y1="{py(tv):.1f}" x2="{x0}" '
                 f'y2="{py(tv):.1f}" stroke="#444"/>')
        s.append(f'<text x="{x0 - 6}" y="{py(tv) + 3:.1f}" text-anchor="end" '
                 f'font-size="10">{_fmt(tv)}</text>')
    s.append(f'<text x="{x0 + iw / 2:.1f}" y="{y0 + ih + 30}" text-anchor="middle" '
             f'font-size="11">{x_label}</text>')
    s.append(f'<text x="{ox + 14}" y="{y0 + ih / 2:.1f}" text-anchor="middle" '
             f'font-size="11" transform="rotate(-90 {ox + 14} {y0 + ih / 2:.1f})">'
             f'{y_label}</text>')

    for i, (label, t, mean, std) in enumerate(panel.curves):
        color = PALETTE[i % len(PALETTE)]
        upper = [(px(x), py(m + sd)) for x, m, sd in zip(t, mean, std)]
        lower = [(px(x), py(m - sd)) for x, m, sd in zip(t, mean, std)]
        band = " ".join(f"{x:.2f},{y:.2f}" for x, y in upper + lower[::-1])
        s.append(f'<polygon points="{band}" fill="{color}" fill-opacity="0.18" '
                 f'stroke="none"/>')
        line = " ".join(f"{px(x):.2f},{py(m):.2f}" for x, m in zip(t, mean))
        s.append(f'<polyline points="{line}" fill="none" stroke="{color}" '
                 f'stroke-width="1.6"/>')
        ly = y0 + 14 + 14 * i
        s.append(f'<line x1="{x0 + 8}" y1="{ly}" x2="{x0 + 30}" y2="{ly}" '
                 f'stroke="{color}" stroke-width="2"/>')
        s.append(f'<text x="{x0 + 34}" y="{ly + 3}" font-size="10">{label}</text>')
    s.append("</g>")
    return "\n".join(s)
