"""Deterministic SVG drawings of worlds, sites and cell fans."""

from __future__ import annotations

import numpy as np

from .errors import NotTwoDimensional
from .sites import BoxSite, Configuration, Disc, Points, Segment, Site, Union
from .world import Ball, Box, Polytope

PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"]


def _fmt(v: float) -> str:
    s = f"{v:.3f}".rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


class _Canvas:
    def __init__(self, viewport, width, height, pad=10.0):
        self.x0, self.y0, self.x1, self.y1 = viewport
        self.s = min((width - 2 * pad) / (self.x1 - self.x0), (height - 2 * pad) / (self.y1 - self.y0))
        self.pad = pad
        self.width, self.height = width, height

    def xy(self, p) -> str:
        x = self.pad + (p[0] - self.x0) * self.s
        y = self.pad + (self.y1 - p[1]) * self.s
        return f"{_fmt(x)} {_fmt(y)}"

    def poly(self, pts) -> str:
        return "M " + " L ".join(self.xy(p) for p in pts) + " Z"


def _viewport(config: Configuration, render: dict) -> list[float]:
    if "viewport" in render:
        return list(render["viewport"])
    w = config.world
    if w.bounded:
        lo, hi = w.bounds()
    else:
        pts = np.concatenate([s.extreme_points(config.space) if not isinstance(s, Disc)
                              else s.boundary_points(config.space, 16) for s in config.sites])
        lo, hi = pts.min(axis=0) - 10.0, pts.max(axis=0) + 10.0
        lo = np.where(np.isfinite(w.bounds()[0]), np.maximum(lo, w.bounds()[0]), lo)
        hi = np.where(np.isfinite(w.bounds()[1]), np.minimum(hi, w.bounds()[1]), hi)
    return [float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1])]


def _world_outline(config: Configuration, c: _Canvas) -> str:
    w = config.world
    if isinstance(w, Box):
        lo = np.maximum(w.lo, [c.x0, c.y0])
        hi = np.minimum(w.hi, [c.x1, c.y1])
        pts = [lo, (hi[0], lo[1]), hi, (lo[0], hi[1])]
    elif isinstance(w, Ball):
        a = 2 * np.pi * np.arange(256) / 256
        pts = w.center + w.radius * w.space.unit(np.stack([np.cos(a), np.sin(a)], axis=1))
    elif isinstance(w, Polytope):
        v = w.vertices
        ctr = v.mean(axis=0)
        pts = v[np.argsort(np.arctan2(v[:, 1] - ctr[1], v[:, 0] - ctr[0]))]
    else:  # pragma: no cover
        return ""
    return f'<path class="world" d="{c.poly(pts)}" fill="none" stroke="#000" stroke-width="1"/>'


def _site_shapes(site: Site, space, c: _Canvas, color: str) -> list[str]:
    out = []
    if isinstance(site, Union):
        for m in site.members:
            out += _site_shapes(m, space, c, color)
    elif isinstance(site, Points):
        for p in site.coords:
            x, y = c.xy(p).split()
            out.append(f'<circle cx="{x}" cy="{y}" r="3" fill="{color}" stroke="#000" stroke-width="0.5"/>')
    elif isinstance(site, Segment):
        out.append(f'<path d="M {c.xy(site.a)} L {c.xy(site.b)}" stroke="{color}" stroke-width="3"/>')
    elif isinstance(site, Disc):
        pts = site.boundary_points(space, 128) if site.radius > 0 else np.repeat(site.center[None], 3, 0)
        out.append(f'<path d="{c.poly(pts)}" fill="{color}" stroke="#000" stroke-width="0.5"/>')
    elif isinstance(site, BoxSite):
        lo, hi = site.lo, site.hi
        pts = [lo, (hi[0], lo[1]), hi, (lo[0], hi[1])]
        out.append(f'<path d="{c.poly(pts)}" fill="{color}" stroke="#000" stroke-width="0.5"/>')
    return out


def render_svg(config: Configuration, cells=(), path: str | None = None, render: dict | None = None) -> str:
    """SVG text for the world, the sites and each cell's fan of segments.

    Output depends only on the inputs (fixed number formatting, fixed
    element order), so identical inputs give byte-identical files.
    """
    if config.space.dim != 2:
        raise NotTwoDimensional("only planar scenes can be drawn")
    render = render or {}
    width = float(render.get("width", 600.0))
    height = float(render.get("height", 600.0))
    colors = render.get("colors") or PALETTE
    c = _Canvas(_viewport(config, render), width, height)
    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_fmt(width)}" height="{_fmt(height)}" '
        f'viewBox="0 0 {_fmt(width)} {_fmt(height)}">',
        '<rect width="100%" height="100%" fill="#fff"/>',
        _world_outline(config, c),
    ]
    for cell in cells:
        color = colors[cell.k % len(colors)]
        lines.append(f'<g class="cell" data-k="{cell.k}" stroke="{color}" stroke-width="0.6" fill="none">')
        for a, row in zip(cell.anchors, cell.lengths):
            segs = [f"M {c.xy(a)} L {c.xy(a + t * th)}" for th, t in zip(cell.thetas, row) if t > 0]
            if segs:
                lines.append(f'<path data-anchor="{_fmt(a[0])} {_fmt(a[1])}" d="{" ".join(segs)}"/>')
        lines.append("</g>")
    for k, site in enumerate(config.sites):
        lines.append(f'<g class="site" data-k="{k}">')
        lines += _site_shapes(site, config.space, c, colors[k % len(colors)])
        lines.append("</g>")
    lines.append("</svg>")
    svg = "\n".join(lines) + "\n"
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(svg)
    return svg
