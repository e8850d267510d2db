"""Deterministic SVG maps of domain assignments and uncertainty.

The SVG is assembled by hand so identical inputs produce byte-identical
files; colors are assigned by domain index from a fixed palette, and the
optional uncertainty panel shades cells by log10 of their uncertainty
score (clamped below at 1e-4).
"""

from __future__ import annotations

import math

import numpy as np

PALETTE = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
    "#aec7e8", "#ffbb78", "#98df8a", "#ff9896", "#c5b0d5",
    "#c49c94", "#f7b6d2", "#c7c7c7", "#dbdb8d", "#9edae5",
]

_PANEL = 420.0
_MARGIN = 30.0
_U_FLOOR = 1e-4


def domain_color(domain: int) -> str:
    return PALETTE[(int(domain) - 1) % len(PALETTE)]


def _uncertainty_color(u: float) -> str:
    t = (max(-4.0, min(0.0, math.log10(max(float(u), _U_FLOOR)))) + 4.0) / 4.0
    lo = (245, 245, 245)
    hi = (165, 15, 21)
    rgb = tuple(round(a + t * (b - a)) for a, b in zip(lo, hi))
    return "#{:02x}{:02x}{:02x}".format(*rgb)


def _layout(coords: np.ndarray) -> tuple[np.ndarray, float]:
    span = coords.max(axis=0) - coords.min(axis=0)
    scale = (_PANEL - 2 * _MARGIN) / max(float(span.max()), 1.0)
    xy = (coords - coords.min(axis=0)) * scale + _MARGIN
    # SVG y grows downward; flip to keep the map orientation natural.
    xy[:, 1] = _PANEL - xy[:, 1]
    n = coords.shape[0]
    radius = 0.35 * scale
    if n > 1:
        diff = coords[:, None, :] - coords[None, :, :]
        d = np.sqrt((diff * diff).sum(axis=-1))
        d[d == 0] = np.inf
        np.fill_diagonal(d, np.inf)
        nearest = float(d.min())
        if math.isfinite(nearest):
            radius = 0.35 * nearest * scale
    return xy, max(radius, 1.5)


def render_domain_map(
    coords: np.ndarray, labels: np.ndarray, uncertainty: np.ndarray | None = None
) -> str:
    """SVG text with one circle per cell; a second panel appears iff an
    uncertainty vector is supplied."""
    coords = np.asarray(coords, dtype=float)
    labels = np.asarray(labels)
    if coords.shape[0] != labels.shape[0]:
        raise ValueError("coordinates and labels differ in length")
    xy, radius = _layout(coords)
    panels = 1 if uncertainty is None else 2
    width = _PANEL * panels
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0f}" '
        f'height="{_PANEL:.0f}" viewBox="0 0 {width:.0f} {_PANEL:.0f}">',
        f'<rect width="{width:.0f}" height="{_PANEL:.0f}" fill="#ffffff"/>',
        f'<text x="{_MARGIN:.1f}" y="18" font-family="sans-serif" '
        f'font-size="13">domains</text>',
    ]
    for (x, y), lab in zip(xy, labels):
        parts.append(
            f'<circle cx="{x:.3f}" cy="{y:.3f}" r="{radius:.3f}" '
            f'fill="{domain_color(int(lab))}"/>'
        )
    if uncertainty is not None:
        if len(uncertainty) != labels.shape[0]:
            raise ValueError("uncertainty vector does not match the labels")
        parts.append(
            f'<text x="{_PANEL + _MARGIN:.1f}" y="18" font-family="sans-serif" '
            f'font-size="13">uncertainty (log10)</text>'
        )
        for (x, y), u in zip(xy, np.asarray(uncertainty, dtype=float)):
            parts.append(
                f'<circle cx="{x + _PANEL:.3f}" cy="{y:.3f}" r="{radius:.3f}" '
                f'fill="{_uncertainty_color(u)}"/>'
            )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
