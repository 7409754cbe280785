"""Deterministic SVG figures: per-language coefficient forest plots and by-language mean scatters."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .stats.loess import loess

WIDTH = 640
MARGIN_LEFT = 130
MARGIN_RIGHT = 30
MARGIN_TOP = 50
ROW_HEIGHT = 22

STYLE = """
  .axis { stroke: #333; stroke-width: 1; }
  .zero { stroke: #888; stroke-width: 1; stroke-dasharray: 4 3; }
  .ci { stroke: #1f4e9c; stroke-width: 2; }
  .point { fill: #1f4e9c; }
  .muted .ci { stroke: #b0b0b0; }
  .muted .point { fill: #b0b0b0; }
  .linear { stroke: #d6604d; stroke-width: 2; fill: none; }
  .loess { stroke: #2166ac; stroke-width: 2; fill: none; }
  .dot { fill: #444; }
  text { font-family: sans-serif; font-size: 11px; }
  .title { font-size: 14px; font-weight: bold; }
"""


@dataclass(frozen=True)
class ForestRow:
    label: str
    beta: float
    ci_low: float
    ci_high: float


def _f(x: float) -> str:
    return f"{x:.2f}"


def _svg(width: float, height: float, body: list[str]) -> str:
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{_f(width)}" height="{_f(height)}" '
            f'viewBox="0 0 {_f(width)} {_f(height)}">')
    return "\n".join([head, f"<style>{STYLE}</style>", *body, "</svg>", ""])


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    return [lo + (hi - lo) * i / (n - 1) for i in range(n)]


def _padded_range(values: Sequence[float]) -> tuple[float, float]:
    lo, hi = float(min(values)), float(max(values))
    if hi == lo:
        lo, hi = lo - 1.0, hi + 1.0
    pad = 0.05 * (hi - lo)
    return lo - pad, hi + pad


def render_forest(rows: Sequence[ForestRow], title: str, path: Path | None = None,
                  xlabel: str = "coefficient (95% CI)") -> str:
    """One row per label sorted by estimate; CIs crossing zero are drawn muted."""
    if not rows:
        raise ValueError("forest plot needs at least one estimate")
    rows = sorted(rows, key=lambda r: (r.beta, r.label))
    lo, hi = _padded_range([0.0] + [r.ci_low for r in rows] + [r.ci_high for r in rows])
    plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT
    height = MARGIN_TOP + ROW_HEIGHT * len(rows) + 50

    def sx(v: float) -> float:
        return MARGIN_LEFT + (v - lo) / (hi - lo) * plot_w

    body = [f'<text class="title" x="{_f(WIDTH / 2)}" y="24" text-anchor="middle">{escape(title)}</text>']
    y_end = MARGIN_TOP + ROW_HEIGHT * len(rows)
    body.append(f'<line class="zero" x1="{_f(sx(0))}" y1="{_f(MARGIN_TOP - 8)}" '
                f'x2="{_f(sx(0))}" y2="{_f(y_end)}"/>')
    for i, r in enumerate(rows):
        y = MARGIN_TOP + ROW_HEIGHT * i + ROW_HEIGHT / 2
        cls = "muted" if r.ci_low <= 0 <= r.ci_high else "significant"
        body.append(
            f'<g class="row {cls}" data-label="{escape(r.label)}" data-beta="{r.beta!r}" '
            f'data-ci-low="{r.ci_low!r}" data-ci-high="{r.ci_high!r}">'
            f'<text x="{_f(MARGIN_LEFT - 8)}" y="{_f(y + 4)}" text-anchor="end">{escape(r.label)}</text>'
            f'<line class="ci" x1="{_f(sx(r.ci_low))}" y1="{_f(y)}" x2="{_f(sx(r.ci_high))}" y2="{_f(y)}"/>'
            f'<circle class="point" cx="{_f(sx(r.beta))}" cy="{_f(y)}" r="4"/></g>')
    body.append(f'<line class="axis" x1="{MARGIN_LEFT}" y1="{_f(y_end)}" '
                f'x2="{MARGIN_LEFT + plot_w}" y2="{_f(y_end)}"/>')
    for t in _ticks(lo, hi):
        body.append(f'<text x="{_f(sx(t))}" y="{_f(y_end + 16)}" text-anchor="middle">{t:.2f}</text>')
    body.append(f'<text x="{_f(MARGIN_LEFT + plot_w / 2)}" y="{_f(y_end + 36)}" '
                f'text-anchor="middle">{escape(xlabel)}</text>')
    svg = _svg(WIDTH, height, body)
    if path is not None:
        Path(path).write_text(svg, encoding="utf-8")
    return svg


def render_scatter(points: Sequence[tuple[str, float, float]], title: str, xlabel: str,
                   ylabel: str, path: Path | None = None, span: float = 0.75,
                   n_grid: int = 50) -> str:
    """By-language means with a least-squares line and, given at least 5 points, a LOESS curve."""
    if len(points) < 3:
        raise ValueError("scatter plot needs at least 3 points")
    labels = [p[0] for p in points]
    if len(set(labels)) != len(labels):
        raise ValueError("duplicate labels in scatter plot")
    x = np.array([p[1] for p in points], dtype=float)
    y = np.array([p[2] for p in points], dtype=float)
    size = 460
    left, top, plot = 70, 50, size - 100
    xlo, xhi = _padded_range(x)
    ylo, yhi = _padded_range(y)

    def sx(v):
        return left + (v - xlo) / (xhi - xlo) * plot

    def sy(v):
        return top + plot - (v - ylo) / (yhi - ylo) * plot

    body = [f'<text class="title" x="{_f(left + plot / 2)}" y="24" text-anchor="middle">{escape(title)}</text>',
            f'<line class="axis" x1="{left}" y1="{top + plot}" x2="{left + plot}" y2="{top + plot}"/>',
            f'<line class="axis" x1="{left}" y1="{top}" x2="{left}" y2="{top + plot}"/>']
    for t in _ticks(xlo, xhi):
        body.append(f'<text x="{_f(sx(t))}" y="{top + plot + 16}" text-anchor="middle">{t:.2f}</text>')
    for t in _ticks(ylo, yhi):
        body.append(f'<text x="{left - 6}" y="{_f(sy(t) + 4)}" text-anchor="end">{t:.2f}</text>')
    body.append(f'<text x="{_f(left + plot / 2)}" y="{top + plot + 36}" text-anchor="middle">{escape(xlabel)}</text>')
    body.append(f'<text x="16" y="{_f(top + plot / 2)}" text-anchor="middle" '
                f'transform="rotate(-90 16 {_f(top + plot / 2)})">{escape(ylabel)}</text>')

    grid = np.linspace(x.min(), x.max(), n_grid)
    if np.ptp(x) > 0:
        slope, intercept = np.polyfit(x, y, 1)
        line = slope * grid + intercept
        body.append('<polyline class="linear" points="'
                    + " ".join(f"{_f(sx(a))},{_f(sy(b))}" for a, b in zip(grid, line)) + '"/>')
    legend = ["linear fit"]
    if len(points) >= 5:
        curve = loess(x, y, span=span, query=grid)
        body.append('<polyline class="loess" points="'
                    + " ".join(f"{_f(sx(a))},{_f(sy(b))}" for a, b in zip(grid, curve)) + '"/>')
        legend.append(f"LOESS (span {span:g})")
    else:
        legend.append("LOESS omitted (fewer than 5 points)")
    for lab, a, b in points:
        body.append(f'<g class="language" data-label="{escape(lab)}">'
                    f'<circle class="dot" cx="{_f(sx(a))}" cy="{_f(sy(b))}" r="3.5"/>'
                    f'<text x="{_f(sx(a) + 6)}" y="{_f(sy(b) - 6)}">{escape(lab)}</text></g>')
    for i, text in enumerate(legend):
        body.append(f'<text class="legend" x="{left + 8}" y="{top + 14 + 14 * i}">{escape(text)}</text>')
    svg = _svg(size, size, body)
    if path is not None:
        Path(path).write_text(svg, encoding="utf-8")
    return svg
