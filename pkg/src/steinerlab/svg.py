"""Minimal SVG rendering of planar trees and radius profiles.

Terminals are drawn red, branch points blue, edges stroked dark, matching
the usual figure conventions for these trees.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .geometry import EmbeddedForest

_HEADER = (
    '<?xml version="1.0" encoding="UTF-8"?>\n'
    '<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" '
    'viewBox="{x0} {y0} {vw} {vh}">\n'
)


def render_tree(tree: EmbeddedForest, path, size: int = 640, circle_radius: float | None = None) -> None:
    """Write an SVG of a planar forest; optionally draw a reference circle
    (e.g. the unit circle carrying the terminals)."""
    if tree.dim != 2:
        raise ValueError("SVG rendering requires d = 2")
    pts = tree.vertices
    if pts.size == 0:
        Path(path).write_text(_HEADER.format(w=size, h=size, x0=0, y0=0, vw=1, vh=1) + "</svg>\n")
        return
    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    if circle_radius is not None:
        lo = np.minimum(lo, -circle_radius)
        hi = np.maximum(hi, circle_radius)
    span = float(max(hi[0] - lo[0], hi[1] - lo[1], 1e-9))
    pad = 0.06 * span
    x0, y0 = lo[0] - pad, lo[1] - pad
    vw = (hi[0] - lo[0]) + 2 * pad
    vh = (hi[1] - lo[1]) + 2 * pad
    stroke = span / 300.0
    dot = span / 120.0

    def sy(y: float) -> float:
        # SVG y grows downward
        return y0 + vh - (y - y0)

    out = [_HEADER.format(w=size, h=int(size * vh / vw), x0=f"{x0:g}", y0=f"{y0:g}",
                          vw=f"{vw:g}", vh=f"{vh:g}")]
    if circle_radius is not None:
        out.append(
            f'  <circle cx="0" cy="{sy(0):g}" r="{circle_radius:g}" '
            f'fill="none" stroke="#999999" stroke-width="{stroke/2:g}"/>\n'
        )
    for a, b in tree.segments():
        out.append(
            f'  <line x1="{a[0]:g}" y1="{sy(a[1]):g}" x2="{b[0]:g}" y2="{sy(b[1]):g}" '
            f'stroke="#1a1a66" stroke-width="{stroke:g}"/>\n'
        )
    for v in range(tree.n_vertices):
        color = "#cc2222" if v in tree.terminals else "#2244cc"
        r = dot if v in tree.terminals else 0.8 * dot
        out.append(
            f'  <circle cx="{pts[v][0]:g}" cy="{sy(pts[v][1]):g}" r="{r:g}" fill="{color}"/>\n'
        )
    out.append("</svg>\n")
    Path(path).write_text("".join(out), encoding="utf-8")


def render_profile(radii: np.ndarray, lengths: np.ndarray, path, size: int = 640) -> None:
    """Polyline plot of the inside-ball length against the radius."""
    radii = np.asarray(radii, dtype=float)
    lengths = np.asarray(lengths, dtype=float)
    if radii.size == 0:
        raise ValueError("empty profile")
    rmax = float(radii.max())
    lmax = float(max(lengths.max(), 1e-9))
    margin = 0.08
    pts = []
    for r, l in zip(radii, lengths):
        px = margin + (1 - 2 * margin) * r / rmax
        py = 1 - margin - (1 - 2 * margin) * l / lmax
        pts.append(f"{px * size:.2f},{py * size:.2f}")
    out = [
        _HEADER.format(w=size, h=size, x0=0, y0=0, vw=size, vh=size),
        f'  <rect x="0" y="0" width="{size}" height="{size}" fill="white"/>\n',
        f'  <polyline points="{" ".join(pts)}" fill="none" stroke="#1a1a66" stroke-width="2"/>\n',
        f'  <text x="{size*0.45:.0f}" y="{size*0.98:.0f}" font-size="{size//40}">radius</text>\n',
        "</svg>\n",
    ]
    Path(path).write_text("".join(out), encoding="utf-8")
