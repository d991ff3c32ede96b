"""Minimal native SVG line plots and histograms for quick-look output."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 640, 400
MARGIN = {"left": 70, "right": 20, "top": 40, "bottom": 50}
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")


class _Axes:
    def __init__(self, xlim, ylim, logy: bool = False):
        self.logy = logy
        self.x0, self.x1 = xlim
        self.y0, self.y1 = (math.log10(ylim[0]), math.log10(ylim[1])) if logy else ylim
        if self.x1 == self.x0:
            self.x1 = self.x0 + 1.0
        if self.y1 == self.y0:
            self.y1 = self.y0 + 1.0
        self.w = WIDTH - MARGIN["left"] - MARGIN["right"]
        self.h = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def px(self, x):
        return MARGIN["left"] + (np.asarray(x, float) - self.x0) / (self.x1 - self.x0) * self.w

    def py(self, y):
        y = np.log10(np.asarray(y, float)) if self.logy else np.asarray(y, float)
        return MARGIN["top"] + (self.y1 - y) / (self.y1 - self.y0) * self.h


def _ticks(lo: float, hi: float, n: int = 5):
    return np.linspace(lo, hi, n)


def _frame(ax: _Axes, title: str, xlabel: str, ylabel: str) -> list:
    left, top = MARGIN["left"], MARGIN["top"]
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
           f'font-family="sans-serif" font-size="12">',
           f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
           f'<rect x="{left}" y="{top}" width="{ax.w}" height="{ax.h}" fill="none" stroke="black"/>',
           f'<text x="{WIDTH / 2}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
           f'<text x="{left + ax.w / 2}" y="{HEIGHT - 12}" text-anchor="middle">{escape(xlabel)}</text>',
           f'<text x="16" y="{top + ax.h / 2}" text-anchor="middle" '
           f'transform="rotate(-90 16 {top + ax.h / 2})">{escape(ylabel)}</text>']
    for xv in _ticks(ax.x0, ax.x1):
        px = ax.px(xv)
        out.append(f'<line x1="{px:.1f}" y1="{top + ax.h}" x2="{px:.1f}" y2="{top + ax.h + 5}" stroke="black"/>')
        out.append(f'<text x="{px:.1f}" y="{top + ax.h + 18}" text-anchor="middle">{xv:.3g}</text>')
    for yv in _ticks(ax.y0, ax.y1):
        py = MARGIN["top"] + (ax.y1 - yv) / (ax.y1 - ax.y0) * ax.h
        label = f"{10**yv:.2g}" if ax.logy else f"{yv:.3g}"
        out.append(f'<line x1="{left - 5}" y1="{py:.1f}" x2="{left}" y2="{py:.1f}" stroke="black"/>')
        out.append(f'<text x="{left - 8}" y="{py + 4:.1f}" text-anchor="end">{label}</text>')
    return out


def _legend(entries) -> list:
    """``entries`` is a list of ``(label, color)``."""
    out = []
    for i, (label, c) in enumerate(entries):
        y = MARGIN["top"] + 14 + 16 * i
        x = WIDTH - MARGIN["right"] - 150
        out.append(f'<line x1="{x}" y1="{y - 4}" x2="{x + 20}" y2="{y - 4}" stroke="{c}" stroke-width="2"/>')
        out.append(f'<text x="{x + 26}" y="{y}">{escape(label)}</text>')
    return out


def _polyline(ax: _Axes, x, y, color: str) -> str:
    pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(ax.px(x), ax.py(y)))
    return f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="2"/>'


def line_plot(series, title: str = "", xlabel: str = "", ylabel: str = "", logy: bool = False) -> str:
    """``series`` is a list of ``(x, y, label)``; non-finite points are dropped."""
    clean = []
    for x, y, label in series:
        x, y = np.asarray(x, float), np.asarray(y, float)
        keep = np.isfinite(x) & np.isfinite(y) & ((y > 0) if logy else True)
        clean.append((x[keep], y[keep], label))
    xs = np.concatenate([c[0] for c in clean]) if clean else np.zeros(1)
    ys = np.concatenate([c[1] for c in clean]) if clean else np.ones(1)
    if xs.size == 0:
        xs, ys = np.zeros(1), np.ones(1)
    ax = _Axes((xs.min(), xs.max()), (ys.min(), ys.max()), logy)
    out = _frame(ax, title, xlabel, ylabel)
    for i, (x, y, _) in enumerate(clean):
        if x.size:
            out.append(_polyline(ax, x, y, COLORS[i % len(COLORS)]))
    out += _legend([(c[2], COLORS[i % len(COLORS)]) for i, c in enumerate(clean)])
    out.append("</svg>")
    return "\n".join(out)


def histogram_plot(samples, bins: int = 30, curve=None, title: str = "", xlabel: str = "x") -> str:
    """Density-normalized histogram of ``samples`` with an optional ``(x, y)`` reference curve."""
    samples = np.asarray(samples, float).ravel()
    dens, edges = np.histogram(samples, bins=bins, density=True)
    ymax = float(dens.max())
    xlo, xhi = float(edges[0]), float(edges[-1])
    if curve is not None:
        cx, cy = np.asarray(curve[0], float), np.asarray(curve[1], float)
        keep = (cx >= xlo) & (cx <= xhi)
        cx, cy = cx[keep], cy[keep]
        if cy.size:
            ymax = max(ymax, float(cy.max()))
    ax = _Axes((xlo, xhi), (0.0, 1.05 * ymax if ymax > 0 else 1.0))
    out = _frame(ax, title, xlabel, "density")
    for d, a, b in zip(dens, edges[:-1], edges[1:]):
        x0, x1 = ax.px(a), ax.px(b)
        y0, y1 = ax.py(d), ax.py(0.0)
        out.append(f'<rect x="{x0:.2f}" y="{y0:.2f}" width="{x1 - x0:.2f}" height="{y1 - y0:.2f}" '
                   f'fill="#9ecae1" stroke="#3182bd"/>')
    if curve is not None and cx.size:
        out.append(_polyline(ax, cx, cy, COLORS[1]))
        out += _legend([("reference", COLORS[1])])
    out.append("</svg>")
    return "\n".join(out)


def write_svg(path: str, svg: str) -> None:
    with open(path, "w") as fh:
        fh.write(svg)
