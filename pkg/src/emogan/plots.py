"""Deterministic SVG emitters for scatter and line plots.

Hand-rolled on purpose: output bytes depend only on the input data (fixed
viewport, fixed palette keyed by class/series index, fixed float
formatting), so re-running an experiment with the same seed reproduces
identical files.
"""

from __future__ import annotations

import numpy as np

WIDTH, HEIGHT = 640, 480
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 60, 20, 36, 46

PALETTE = ("#e41a1c", "#377eb8", "#4daf4a", "#984ea3", "#ff7f00", "#777777")


def _fmt(v):
    return f"{v:.2f}"


def _bounds(values, pad_frac=0.06):
    finite = [v for v in values if np.isfinite(v)]
    if not finite:
        return 0.0, 1.0
    lo, hi = min(finite), max(finite)
    if lo == hi:
        lo, hi = lo - 0.5, hi + 0.5
    pad = (hi - lo) * pad_frac
    return lo - pad, hi + pad


class _Canvas:
    def __init__(self, title, xlabel, ylabel, xlim, ylim):
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
            f'viewBox="0 0 {WIDTH} {HEIGHT}">',
            f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
            f'<text x="{WIDTH / 2:.0f}" y="20" font-family="sans-serif" font-size="14" '
            f'text-anchor="middle">{_escape(title)}</text>',
        ]
        self.x0, self.x1 = xlim
        self.y0, self.y1 = ylim
        self._axes(xlabel, ylabel)

    def _sx(self, x):
        frac = (x - self.x0) / (self.x1 - self.x0)
        return MARGIN_L + frac * (WIDTH - MARGIN_L - MARGIN_R)

    def _sy(self, y):
        frac = (y - self.y0) / (self.y1 - self.y0)
        return HEIGHT - MARGIN_B - frac * (HEIGHT - MARGIN_T - MARGIN_B)

    def _axes(self, xlabel, ylabel):
        left, right = MARGIN_L, WIDTH - MARGIN_R
        top, bottom = MARGIN_T, HEIGHT - MARGIN_B
        self.parts.append(
            f'<rect x="{left}" y="{top}" width="{right - left}" height="{bottom - top}" '
            f'fill="none" stroke="#222222"/>'
        )
        for i in range(5):
            xv = self.x0 + (self.x1 - self.x0) * i / 4
            yv = self.y0 + (self.y1 - self.y0) * i / 4
            xpix, ypix = self._sx(xv), self._sy(yv)
            self.parts.append(
                f'<line x1="{_fmt(xpix)}" y1="{bottom}" x2="{_fmt(xpix)}" y2="{bottom + 5}" stroke="#222222"/>'
            )
            self.parts.append(
                f'<text x="{_fmt(xpix)}" y="{bottom + 18}" font-family="sans-serif" '
                f'font-size="10" text-anchor="middle">{xv:.4g}</text>'
            )
            self.parts.append(
                f'<line x1="{left - 5}" y1="{_fmt(ypix)}" x2="{left}" y2="{_fmt(ypix)}" stroke="#222222"/>'
            )
            self.parts.append(
                f'<text x="{left - 8}" y="{_fmt(ypix + 3)}" font-family="sans-serif" '
                f'font-size="10" text-anchor="end">{yv:.4g}</text>'
            )
        self.parts.append(
            f'<text x="{(left + right) / 2:.0f}" y="{HEIGHT - 10}" font-family="sans-serif" '
            f'font-size="12" text-anchor="middle">{_escape(xlabel)}</text>'
        )
        self.parts.append(
            f'<text x="16" y="{(top + bottom) / 2:.0f}" font-family="sans-serif" font-size="12" '
            f'text-anchor="middle" transform="rotate(-90 16 {(top + bottom) / 2:.0f})">'
            f"{_escape(ylabel)}</text>"
        )

    def legend(self, entries):
        x = WIDTH - MARGIN_R - 150
        y = MARGIN_T + 14
        for i, (label, color) in enumerate(entries):
            self.parts.append(
                f'<rect x="{x}" y="{y + 16 * i - 8}" width="10" height="10" fill="{color}"/>'
            )
            self.parts.append(
                f'<text x="{x + 14}" y="{y + 16 * i + 1}" font-family="sans-serif" '
                f'font-size="11">{_escape(label)}</text>'
            )

    def finish(self):
        self.parts.append("</svg>")
        return "\n".join(self.parts) + "\n"


def _escape(text):
    return (
        str(text)
        .replace("&", "&amp;")
        .replace("<", "&lt;")
        .replace(">", "&gt;")
        .replace('"', "&quot;")
    )


def scatter_svg(path, groups, title="", xlabel="x", ylabel="y"):
    """groups: list of (label, (n, 2) points); color keyed by group index."""
    arrays = [np.asarray(pts, dtype=np.float64).reshape(-1, 2) for _, pts in groups]
    xs = [x for a in arrays for x in a[:, 0]]
    ys = [y for a in arrays for y in a[:, 1]]
    canvas = _Canvas(title, xlabel, ylabel, _bounds(xs), _bounds(ys))
    legend = []
    for i, ((label, _), pts) in enumerate(zip(groups, arrays)):
        color = PALETTE[i % len(PALETTE)]
        legend.append((label, color))
        for row in pts:
            if not (np.isfinite(row[0]) and np.isfinite(row[1])):
                continue
            canvas.parts.append(
                f'<circle cx="{_fmt(canvas._sx(row[0]))}" cy="{_fmt(canvas._sy(row[1]))}" '
                f'r="2.2" fill="{color}" fill-opacity="0.55"/>'
            )
    canvas.legend(legend)
    _write(path, canvas.finish())


def line_svg(path, series, title="", xlabel="x", ylabel="y"):
    """series: list of (label, xs, ys); color keyed by series index."""
    xs = [x for _, sx, _ in series for x in sx]
    ys = [y for _, _, sy in series for y in sy]
    canvas = _Canvas(title, xlabel, ylabel, _bounds(xs), _bounds(ys))
    legend = []
    for i, (label, sx, sy) in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        legend.append((label, color))
        if len(sx) == 0:
            continue
        points = " ".join(
            f"{_fmt(canvas._sx(x))},{_fmt(canvas._sy(y))}" for x, y in zip(sx, sy)
        )
        canvas.parts.append(
            f'<polyline points="{points}" fill="none" stroke="{color}" stroke-width="1.6"/>'
        )
    canvas.legend(legend)
    _write(path, canvas.finish())


def _write(path, text):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)
