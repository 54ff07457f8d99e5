"""Dependency-free SVG line plots for benchmark reports.

Deliberately minimal: stacked panels of polylines with min/max axis labels,
enough to eyeball error traces, noise, and the noise-amplitude estimate.
Output bytes are deterministic for identical data.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

__all__ = ["write_panels_svg"]

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b", "#e377c2")

_PANEL_W = 760
_PANEL_H = 180
_MARGIN_L = 56
_MARGIN_R = 12
_MARGIN_T = 26
_MARGIN_B = 22


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def _polyline(x, y, x0, x1, y0, y1, px, py, width, height, color) -> str:
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0
    xs = px + (np.asarray(x) - x0) / (x1 - x0) * width
    ys = py + height - (np.asarray(y) - y0) / (y1 - y0) * height
    pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(xs, ys))
    return (
        f'<polyline fill="none" stroke="{color}" stroke-width="1" points="{pts}"/>'
    )


def write_panels_svg(
    path,
    panels: Sequence[tuple[str, Sequence[tuple[np.ndarray, np.ndarray, str]]]],
) -> None:
    """Write stacked panels; each panel is (title, [(x, y, label), ...])."""
    total_h = len(panels) * _PANEL_H
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_PANEL_W}" '
        f'height="{total_h}" viewBox="0 0 {_PANEL_W} {total_h}">',
        f'<rect width="{_PANEL_W}" height="{total_h}" fill="white"/>',
    ]
    for pi, (title, series) in enumerate(panels):
        top = pi * _PANEL_H
        px = _MARGIN_L
        py = top + _MARGIN_T
        width = _PANEL_W - _MARGIN_L - _MARGIN_R
        height = _PANEL_H - _MARGIN_T - _MARGIN_B
        xs = [np.asarray(s[0], dtype=float) for s in series]
        ys = [np.asarray(s[1], dtype=float) for s in series]
        x0 = min(float(np.min(a)) for a in xs)
        x1 = max(float(np.max(a)) for a in xs)
        y0 = min(float(np.min(a)) for a in ys)
        y1 = max(float(np.max(a)) for a in ys)
        parts.append(
            f'<text x="{px}" y="{top + 16}" font-family="sans-serif" '
            f'font-size="12" fill="#222">{title}</text>'
        )
        parts.append(
            f'<rect x="{px}" y="{py}" width="{width}" height="{height}" '
            'fill="none" stroke="#999" stroke-width="0.5"/>'
        )
        for si, (x, y, label) in enumerate(series):
            color = _COLORS[si % len(_COLORS)]
            parts.append(_polyline(x, y, x0, x1, y0, y1, px, py, width, height, color))
            parts.append(
                f'<text x="{px + width - 150}" y="{py + 14 + 13 * si}" '
                f'font-family="sans-serif" font-size="10" fill="{color}">{label}</text>'
            )
        labels = [
            (px - 4, py + height, "end", _fmt(y0)),
            (px - 4, py + 9, "end", _fmt(y1)),
            (px, py + height + 14, "start", _fmt(x0)),
            (px + width, py + height + 14, "end", _fmt(x1)),
        ]
        for lx, ly, anchor, text in labels:
            parts.append(
                f'<text x="{lx}" y="{ly}" text-anchor="{anchor}" '
                f'font-family="sans-serif" font-size="10" fill="#444">{text}</text>'
            )
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(parts) + "\n")
