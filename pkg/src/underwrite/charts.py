"""Static SVG charts: metric lines with standard-error ribbons, and ranked allocation bands."""

from __future__ import annotations

from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .output import allocation_path, metrics_path, read_allocation_csv, read_metrics_csv

WIDTH, HEIGHT = 640, 400
MARGIN = dict(left=70, right=110, top=40, bottom=50)
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
BAND_SHADES = ("#08306b", "#2171b5", "#6baed6", "#c6dbef", "#deebf7", "#f7fbff")

LINE_CHARTS = {
    "regret": "Regret",
    "cum_regret": "Cumulative regret",
    "exp_reward": "Expected reward",
    "cum_reward": "Cumulative expected reward",
}


class _Canvas:
    def __init__(self, title, x_range, y_range):
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
            f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
            f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
            f'<text x="{WIDTH / 2:.1f}" y="22" text-anchor="middle" font-size="15">{escape(title)}</text>',
        ]
        self.x0, self.x1 = x_range
        self.y0, self.y1 = y_range
        if self.x1 == self.x0:
            self.x1 = self.x0 + 1
        if self.y1 == self.y0:
            self.y0, self.y1 = self.y0 - 0.5, self.y1 + 0.5

    def px(self, x):
        span = WIDTH - MARGIN["left"] - MARGIN["right"]
        return MARGIN["left"] + (np.asarray(x, float) - self.x0) / (self.x1 - self.x0) * span

    def py(self, y):
        span = HEIGHT - MARGIN["top"] - MARGIN["bottom"]
        return HEIGHT - MARGIN["bottom"] - (np.asarray(y, float) - self.y0) / (self.y1 - self.y0) * span

    def axes(self, xlabel, ylabel):
        left, bottom = MARGIN["left"], HEIGHT - MARGIN["bottom"]
        right, top = WIDTH - MARGIN["right"], MARGIN["top"]
        self.parts.append(
            f'<path d="M{left},{top} L{left},{bottom} L{right},{bottom}" fill="none" stroke="black"/>'
        )
        for v in np.linspace(self.y0, self.y1, 5):
            y = float(self.py(v))
            self.parts.append(f'<text x="{left - 6}" y="{y + 4:.1f}" text-anchor="end">{v:.3g}</text>')
        for v in np.linspace(self.x0, self.x1, 5):
            x = float(self.px(v))
            self.parts.append(f'<text x="{x:.1f}" y="{bottom + 16}" text-anchor="middle">{v:.0f}</text>')
        self.parts.append(
            f'<text x="{(left + right) / 2:.1f}" y="{HEIGHT - 12}" text-anchor="middle">{escape(xlabel)}</text>'
        )
        self.parts.append(
            f'<text x="16" y="{(top + bottom) / 2:.1f}" text-anchor="middle" '
            f'transform="rotate(-90 16 {(top + bottom) / 2:.1f})">{escape(ylabel)}</text>'
        )

    def polygon(self, xs, ys, fill, opacity=1.0):
        pts = " ".join(f"{x:.2f},{y:.2f}" for x, y in zip(self.px(xs), self.py(ys)))
        self.parts.append(f'<polygon points="{pts}" fill="{fill}" fill-opacity="{opacity}" stroke="none"/>')

    def line(self, xs, ys, color):
        px, py = self.px(xs), self.py(ys)
        if len(px) == 1:
            self.parts.append(f'<circle cx="{px[0]:.2f}" cy="{py[0]:.2f}" r="3" fill="{color}"/>')
            return
        pts = " ".join(f"{x:.2f},{y:.2f}" for x, y in zip(px, py))
        self.parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')

    def legend(self, i, label, color):
        x = WIDTH - MARGIN["right"] + 12
        y = MARGIN["top"] + 18 * i
        self.parts.append(f'<rect x="{x}" y="{y}" width="12" height="12" fill="{color}"/>')
        self.parts.append(f'<text x="{x + 18}" y="{y + 11}">{escape(label)}</text>')

    def svg(self) -> str:
        return "\n".join(self.parts + ["</svg>"]) + "\n"


def line_chart(title, ylabel, series: dict) -> str:
    """``series`` maps label -> (steps, mean, stderr)."""
    lows = [np.min(m - s) for _, m, s in series.values()]
    highs = [np.max(m + s) for _, m, s in series.values()]
    steps = [x for x, _, _ in series.values()]
    canvas = _Canvas(title, (min(x.min() for x in steps), max(x.max() for x in steps)), (min(lows), max(highs)))
    canvas.axes("time step", ylabel)
    for i, (label, (x, m, s)) in enumerate(series.items()):
        color = PALETTE[i % len(PALETTE)]
        canvas.polygon(np.concatenate([x, x[::-1]]), np.concatenate([m + s, (m - s)[::-1]]), color, 0.2)
        canvas.line(x, m, color)
        canvas.legend(i, label.upper(), color)
    return canvas.svg()


def band_chart(title, bands: np.ndarray) -> str:
    """Stacked ranked fractions, largest band at the bottom."""
    T, M = bands.shape
    steps = np.arange(T, dtype=float)
    if T == 1:
        steps = np.array([-0.5, 0.5])
        bands = np.repeat(bands, 2, axis=0)
    canvas = _Canvas(title, (steps[0], steps[-1]), (0.0, 1.0))
    canvas.axes("time step", "share of approved loans")
    base = np.zeros(len(steps))
    for r in range(M):
        top = base + bands[:, r]
        shade = BAND_SHADES[r % len(BAND_SHADES)]
        canvas.polygon(np.concatenate([steps, steps[::-1]]), np.concatenate([top, base[::-1]]), shade)
        canvas.legend(r, f"rank {r + 1}", shade)
        base = top
    return canvas.svg()


def render_charts(labels, in_dir, out_dir=None) -> list[Path]:
    """Rebuild every chart from the CSVs in ``in_dir``; returns written paths."""
    out_dir = Path(out_dir or in_dir)
    labels = list(labels)
    if not labels:
        return []
    written = []
    metrics = {a: read_metrics_csv(metrics_path(in_dir, a)) for a in labels}
    for stem, title in LINE_CHARTS.items():
        series = {a: (m["step"], m[stem], m[f"{stem}_se"]) for a, m in metrics.items()}
        path = out_dir / f"{stem}.svg"
        path.write_text(line_chart(title, title.lower(), series))
        written.append(path)
    for a in labels:
        bands = read_allocation_csv(allocation_path(in_dir, a))
        path = out_dir / f"allocation_{a}.svg"
        path.write_text(band_chart(f"Loan allocation by context rank ({a.upper()})", bands))
        written.append(path)
    return written
