"""Minimal SVG snapshots of worlds, local maps and sampled trajectories."""
from __future__ import annotations

from pathlib import Path

import numpy as np


class SvgCanvas:
    def __init__(self, bounds, size: int = 600):
        xmin, ymin, xmax, ymax = bounds
        self.bounds = (xmin, ymin, xmax, ymax)
        self.scale = size / max(xmax - xmin, ymax - ymin)
        self.w = (xmax - xmin) * self.scale
        self.h = (ymax - ymin) * self.scale
        self.items: list[str] = []

    def _xy(self, p) -> tuple[float, float]:
        # svg y grows downward
        return ((p[0] - self.bounds[0]) * self.scale, (self.bounds[3] - p[1]) * self.scale)

    def _pts(self, pts) -> str:
        return " ".join("%.2f,%.2f" % self._xy(p) for p in pts)

    def polygon(self, pts, fill="#555", stroke="none", opacity=1.0) -> None:
        self.items.append(f'<polygon points="{self._pts(pts)}" fill="{fill}" stroke="{stroke}" fill-opacity="{opacity}"/>')

    def polyline(self, pts, stroke="#000", width=1.0, opacity=1.0) -> None:
        self.items.append(
            f'<polyline points="{self._pts(pts)}" fill="none" stroke="{stroke}" stroke-width="{width}" stroke-opacity="{opacity}"/>'
        )

    def circle(self, p, r, fill="#000", stroke="none") -> None:
        x, y = self._xy(p)
        self.items.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="{r * self.scale:.2f}" fill="{fill}" stroke="{stroke}"/>')

    def cells(self, centers, res, fill="#333") -> None:
        s = res * self.scale
        for c in centers:
            x, y = self._xy((c[0] - res / 2, c[1] + res / 2))
            self.items.append(f'<rect x="{x:.2f}" y="{y:.2f}" width="{s:.2f}" height="{s:.2f}" fill="{fill}"/>')

    def render(self) -> str:
        body = "\n".join(self.items)
        return (
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.w:.0f}" height="{self.h:.0f}" '
            f'viewBox="0 0 {self.w:.2f} {self.h:.2f}">\n<rect width="100%" height="100%" fill="white"/>\n{body}\n</svg>\n'
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.render())


def world_snapshot(env, trace=None, samples=None, chosen=None, goal=None, footprint_radius: float = 0.3) -> SvgCanvas:
    """World-frame view: obstacles, sampled and chosen paths, robot trace."""
    c = SvgCanvas(env.bounds)
    x0, y0, x1, y1 = env.bounds
    c.polyline([(x0, y0), (x1, y0), (x1, y1), (x0, y1), (x0, y0)], "#000", 2)
    for poly in env.obstacles:
        c.polygon(poly)
    if samples is not None:
        for s in samples:
            c.polyline(s[:, :2], "#1f77b4", 0.6, 0.25)
    if chosen is not None:
        c.polyline(np.asarray(chosen)[:, :2], "#d62728", 2.0)
    if trace is not None:
        c.polyline(np.asarray(trace)[:, :2], "#2ca02c", 1.5)
        c.circle(np.asarray(trace)[-1], footprint_radius, "none", "#2ca02c")
    if goal is not None:
        c.circle(goal, 0.12, "#ff7f0e")
    return c


def local_snapshot(perception, samples=None, chosen=None, goal=None) -> SvgCanvas:
    """Robot-frame view of a local map with sampled trajectories."""
    g = perception.geometry
    c = SvgCanvas(g.extent)
    occ = perception.costmap.values > 0.5
    c.cells(g.cell_centers()[occ], g.resolution)
    if samples is not None:
        for s in samples:
            c.polyline(s[:, :2], "#1f77b4", 0.6, 0.25)
    if chosen is not None:
        c.polyline(np.asarray(chosen)[:, :2], "#d62728", 2.0)
    c.circle((0.0, 0.0), 0.3, "none", "#2ca02c")
    if goal is not None:
        c.circle(goal, 0.12, "#ff7f0e")
    return c
