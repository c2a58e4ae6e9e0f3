"""Standalone SVG rendering of performance curves and box plots."""

from __future__ import annotations

from pathlib import Path
from typing import List, Mapping, Optional, Sequence, Tuple

from .experiment import BoxStats

WIDTH, HEIGHT = 640, 400
MARGIN = 60
COLORS = {"learning": "#1f77b4", "standard": "#d62728"}
FALLBACK = ("#2ca02c", "#9467bd", "#8c564b")


def _color(name: str, i: int) -> str:
    return COLORS.get(name, FALLBACK[i % len(FALLBACK)])


def _fmt(v: float) -> str:
    return f"{v:.2f}".rstrip("0").rstrip(".")


class _Canvas:
    def __init__(self, title: str, xlabel: str, ylabel: str):
        self.parts: List[str] = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
            f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
            f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
            f'<text x="{WIDTH // 2}" y="24" text-anchor="middle" font-size="15">{title}</text>',
            f'<text x="{WIDTH // 2}" y="{HEIGHT - 12}" text-anchor="middle">{xlabel}</text>',
            f'<text x="16" y="{HEIGHT // 2}" text-anchor="middle" '
            f'transform="rotate(-90 16 {HEIGHT // 2})">{ylabel}</text>',
        ]

    def axes(self, x0: float, x1: float, y0: float, y1: float, xticks: Sequence[float],
             yticks: Sequence[float], xlabels: Optional[Sequence[str]] = None) -> None:
        self.x0, self.x1, self.y0, self.y1 = x0, x1, y0, y1
        left, right, top, bottom = MARGIN, WIDTH - MARGIN // 2, MARGIN // 2 + 10, HEIGHT - MARGIN
        self.box = (left, right, top, bottom)
        self.parts.append(f'<line x1="{left}" y1="{bottom}" x2="{right}" y2="{bottom}" stroke="black"/>')
        self.parts.append(f'<line x1="{left}" y1="{top}" x2="{left}" y2="{bottom}" stroke="black"/>')
        for i, t in enumerate(xticks):
            x = self.sx(t)
            label = xlabels[i] if xlabels else _fmt(t)
            self.parts.append(f'<line x1="{_fmt(x)}" y1="{bottom}" x2="{_fmt(x)}" y2="{bottom + 4}" stroke="black"/>')
            self.parts.append(f'<text x="{_fmt(x)}" y="{bottom + 18}" text-anchor="middle">{label}</text>')
        for t in yticks:
            y = self.sy(t)
            self.parts.append(f'<line x1="{left - 4}" y1="{_fmt(y)}" x2="{left}" y2="{_fmt(y)}" stroke="black"/>')
            self.parts.append(f'<text x="{left - 8}" y="{_fmt(y + 4)}" text-anchor="end">{_fmt(t)}</text>')

    def sx(self, v: float) -> float:
        left, right, _, _ = self.box
        span = (self.x1 - self.x0) or 1.0
        return left + (v - self.x0) / span * (right - left)

    def sy(self, v: float) -> float:
        _, _, top, bottom = self.box
        span = (self.y1 - self.y0) or 1.0
        return bottom - (v - self.y0) / span * (bottom - top)

    def legend(self, names: Sequence[str]) -> None:
        _, right, top, _ = self.box
        for i, name in enumerate(names):
            y = top + 8 + 16 * i
            self.parts.append(f'<rect x="{right - 110}" y="{y - 8}" width="10" height="10" fill="{_color(name, i)}"/>')
            self.parts.append(f'<text x="{right - 94}" y="{y + 1}">{name}</text>')

    def render(self) -> str:
        return "\n".join(self.parts + ["</svg>"]) + "\n"


def curve_svg(series: Mapping[str, Sequence[Tuple[float, float]]],
              title: str = "Goals achieved by problem size", ylabel: str = "% goals achieved") -> str:
    """One polyline per series; series are drawn in sorted name order."""
    if not series or not any(series.values()):
        raise ValueError("nothing to plot")
    xs = sorted({x for pts in series.values() for x, _ in pts})
    c = _Canvas(title, "number of goals", ylabel)
    c.axes(min(xs), max(xs), 0.0, 100.0, xs, [0, 20, 40, 60, 80, 100])
    names = sorted(series)
    for i, name in enumerate(names):
        pts = sorted(series[name])
        coords = " ".join(f"{_fmt(c.sx(x))},{_fmt(c.sy(y))}" for x, y in pts)
        c.parts.append(f'<polyline class="series" data-name="{name}" fill="none" stroke="{_color(name, i)}" '
                       f'stroke-width="2" points="{coords}"/>')
        for x, y in pts:
            c.parts.append(f'<circle cx="{_fmt(c.sx(x))}" cy="{_fmt(c.sy(y))}" r="2.5" fill="{_color(name, i)}"/>')
    c.legend(names)
    return c.render()


def box_svg(stats: Mapping[str, BoxStats], title: str = "Goals achieved",
            ylabel: str = "goals achieved") -> str:
    if not stats:
        raise ValueError("nothing to plot")
    names = sorted(stats)
    lo = min(min(s.lower, *s.outliers) if s.outliers else s.lower for s in stats.values())
    hi = max(max(s.upper, *s.outliers) if s.outliers else s.upper for s in stats.values())
    lo, hi = min(lo, 0.0), max(hi, lo + 1.0)
    step = max(1.0, round((hi - lo) / 5))
    yticks = [lo + k * step for k in range(int((hi - lo) / step) + 1)]
    c = _Canvas(title, "agent", ylabel)
    c.axes(0, len(names) + 1, lo, hi, list(range(1, len(names) + 1)), yticks, names)
    half = 0.2 * (c.sx(1) - c.sx(0))
    for i, name in enumerate(names):
        s = stats[name]
        x = c.sx(i + 1)
        col = _color(name, i)
        c.parts.append(f'<g class="box" data-name="{name}" data-q1="{_fmt(s.q1)}" data-q3="{_fmt(s.q3)}">')
        c.parts.append(f'<line x1="{_fmt(x)}" y1="{_fmt(c.sy(s.lower))}" x2="{_fmt(x)}" '
                       f'y2="{_fmt(c.sy(s.upper))}" stroke="black"/>')
        for w in (s.lower, s.upper):
            c.parts.append(f'<line x1="{_fmt(x - half / 2)}" y1="{_fmt(c.sy(w))}" x2="{_fmt(x + half / 2)}" '
                           f'y2="{_fmt(c.sy(w))}" stroke="black"/>')
        top, bottom = c.sy(s.q3), c.sy(s.q1)
        c.parts.append(f'<rect x="{_fmt(x - half)}" y="{_fmt(top)}" width="{_fmt(2 * half)}" '
                       f'height="{_fmt(max(bottom - top, 1.0))}" fill="{col}" fill-opacity="0.5" stroke="black"/>')
        c.parts.append(f'<line x1="{_fmt(x - half)}" y1="{_fmt(c.sy(s.median))}" x2="{_fmt(x + half)}" '
                       f'y2="{_fmt(c.sy(s.median))}" stroke="black" stroke-width="2"/>')
        for o in s.outliers:
            c.parts.append(f'<circle class="outlier" cx="{_fmt(x)}" cy="{_fmt(c.sy(o))}" r="3" '
                           f'fill="none" stroke="{col}"/>')
        c.parts.append("</g>")
    return c.render()


def write_svg(text: str, path) -> Path:
    p = Path(path)
    p.write_text(text)
    return p
