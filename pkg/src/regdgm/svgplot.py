"""A small self-contained SVG line plot renderer.

Only what the experiment outputs need: several polylines on shared axes,
optional circle markers, a legend and tick labels. CSV files remain the
authoritative output; these pictures are a convenience.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf", "#7f7f7f")


@dataclass
class Series:
    label: str
    x: np.ndarray
    y: np.ndarray
    dashed: bool = False


@dataclass
class Marker:
    x: float
    y: float
    label: str = ""
    color: str = "#d62728"


@dataclass
class LinePlot:
    title: str = ""
    xlabel: str = ""
    ylabel: str = ""
    logx: bool = False
    width: int = 640
    height: int = 420
    series: list = field(default_factory=list)
    markers: list = field(default_factory=list)

    def add(self, label, x, y, dashed=False) -> "LinePlot":
        self.series.append(Series(label, np.asarray(x, dtype=float), np.asarray(y, dtype=float), dashed))
        return self

    def mark(self, x, y, label="", color="#d62728") -> "LinePlot":
        self.markers.append(Marker(float(x), float(y), label, color))
        return self

    def _tx(self, x):
        return np.log10(x) if self.logx else x

    def render(self) -> str:
        left, right, top, bottom = 70, 150, 36, 52
        pw, ph = self.width - left - right, self.height - top - bottom

        xs, ys = [], []
        for s in self.series:
            ok = np.isfinite(s.x) & np.isfinite(s.y)
            if self.logx:
                ok &= s.x > 0
            xs.append(self._tx(s.x[ok]))
            ys.append(s.y[ok])
        for m in self.markers:
            if math.isfinite(m.x) and math.isfinite(m.y):
                xs.append(self._tx(np.array([m.x])))
                ys.append(np.array([m.y]))
        allx = np.concatenate(xs) if xs else np.array([0.0, 1.0])
        ally = np.concatenate(ys) if ys else np.array([0.0, 1.0])
        if allx.size == 0:
            allx, ally = np.array([0.0, 1.0]), np.array([0.0, 1.0])
        x0, x1 = _pad(float(allx.min()), float(allx.max()), 0.0)
        y0, y1 = _pad(float(ally.min()), float(ally.max()), 0.05)

        def px(v):
            return left + (v - x0) / (x1 - x0) * pw

        def py(v):
            return top + ph - (v - y0) / (y1 - y0) * ph

        out = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.width}" height="{self.height}" '
            f'font-family="sans-serif" font-size="11">',
            f'<rect width="{self.width}" height="{self.height}" fill="white"/>',
            f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>',
        ]
        for t in _ticks(x0, x1):
            label = _fmt(10 ** t) if self.logx else _fmt(t)
            out.append(f'<line x1="{px(t):.2f}" y1="{top + ph}" x2="{px(t):.2f}" y2="{top + ph + 4}" stroke="#333"/>')
            out.append(f'<text x="{px(t):.2f}" y="{top + ph + 16}" text-anchor="middle">{label}</text>')
        for t in _ticks(y0, y1):
            out.append(f'<line x1="{left - 4}" y1="{py(t):.2f}" x2="{left}" y2="{py(t):.2f}" stroke="#333"/>')
            out.append(f'<text x="{left - 6}" y="{py(t) + 4:.2f}" text-anchor="end">{_fmt(t)}</text>')
        if self.title:
            out.append(f'<text x="{left + pw / 2}" y="{top - 14}" text-anchor="middle" font-size="13">{escape(self.title)}</text>')
        if self.xlabel:
            out.append(f'<text x="{left + pw / 2}" y="{self.height - 12}" text-anchor="middle">{escape(self.xlabel)}</text>')
        if self.ylabel:
            cy = top + ph / 2
            out.append(f'<text x="16" y="{cy}" text-anchor="middle" transform="rotate(-90 16 {cy})">{escape(self.ylabel)}</text>')

        for i, (s, sx, sy) in enumerate(zip(self.series, xs, ys)):
            color = PALETTE[i % len(PALETTE)]
            dash = ' stroke-dasharray="6 4"' if s.dashed else ""
            if sx.size:
                pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(sx, sy))
                out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.6"{dash}/>')
            ly = top + 14 + 16 * i
            out.append(f'<line x1="{left + pw + 10}" y1="{ly}" x2="{left + pw + 30}" y2="{ly}" stroke="{color}" stroke-width="2"{dash}/>')
            out.append(f'<text x="{left + pw + 34}" y="{ly + 4}">{escape(s.label)}</text>')
        for m in self.markers:
            if not (math.isfinite(m.x) and math.isfinite(m.y)):
                continue
            cx, cy = px(self._tx(m.x)), py(m.y)
            out.append(f'<circle cx="{cx:.2f}" cy="{cy:.2f}" r="5" fill="none" stroke="{m.color}" stroke-width="2"/>')
            if m.label:
                out.append(f'<text x="{cx + 7:.2f}" y="{cy - 7:.2f}" fill="{m.color}">{escape(m.label)}</text>')
        out.append("</svg>")
        return "\n".join(out) + "\n"

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.render())


def _pad(lo, hi, frac):
    if hi - lo <= 0:
        d = abs(lo) * 0.1 or 1.0
        return lo - d, hi + d
    d = (hi - lo) * frac
    return lo - d, hi + d


def _ticks(lo, hi, target=6):
    raw = (hi - lo) / target
    mag = 10 ** math.floor(math.log10(raw))
    step = next(s * mag for s in (1, 2, 5, 10) if s * mag >= raw)
    start = math.ceil(lo / step) * step
    return [start + i * step for i in range(int((hi - start) / step + 1e-9) + 1)]


def _fmt(v):
    if v == 0:
        return "0"
    if 1e-3 <= abs(v) < 1e4:
        return f"{v:.4g}"
    return f"{v:.0e}"
