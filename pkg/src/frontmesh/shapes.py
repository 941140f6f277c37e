"""Boundary generators for the bundled test geometries.

Each generator returns a validated BoundarySpec whose edges are already
segmented to the requested scale, i.e. the edges are the initial fronts.
"""

from __future__ import annotations

import math

from .boundary import BoundarySpec, build_spec


def _segment_polyline(corners, h):
    """Subdivide the closed polygon through ``corners`` into edges of ~h."""
    vertices = []
    n = len(corners)
    for i in range(n):
        ax, ay = corners[i]
        bx, by = corners[(i + 1) % n]
        length = math.hypot(bx - ax, by - ay)
        pieces = max(1, round(length / h))
        for k in range(pieces):
            t = k / pieces
            vertices.append((ax + t * (bx - ax), ay + t * (by - ay)))
    return vertices


def square(h=0.1, side=1.0, h_min=None, h_max=None) -> BoundarySpec:
    corners = [(0.0, 0.0), (side, 0.0), (side, side), (0.0, side)]
    verts = _segment_polyline(corners, h)
    return build_spec([(verts, h)], h_min=h_min, h_max=h_max)


def l_shape(h=0.15, size=2.0) -> BoundarySpec:
    """Concave L: a square with one quadrant removed."""
    s = size
    m = size / 2.0
    corners = [(0.0, 0.0), (s, 0.0), (s, m), (m, m), (m, s), (0.0, s)]
    verts = _segment_polyline(corners, h)
    return build_spec([(verts, h)])


def gear_star(h=0.12, teeth=12, r_root=1.0, r_tip=1.35) -> BoundarySpec:
    """A 12-tooth gear-like star polygon with gently sloped flanks."""
    corners = []
    pitch = 2.0 * math.pi / teeth
    # Four corners per tooth: root, flank up, tip, flank down.
    for t in range(teeth):
        base = t * pitch
        for frac, radius in ((0.0, r_root), (0.25, r_tip), (0.55, r_tip), (0.8, r_root)):
            ang = base + frac * pitch
            corners.append((radius * math.cos(ang), radius * math.sin(ang)))
    verts = _segment_polyline(corners, h)
    return build_spec([(verts, h)])


def disk(h=0.05, radius=1.0) -> BoundarySpec:
    n = max(8, round(2.0 * math.pi * radius / h))
    verts = [
        (radius * math.cos(2.0 * math.pi * k / n), radius * math.sin(2.0 * math.pi * k / n))
        for k in range(n)
    ]
    return build_spec([(verts, h)])


def hexagon(h=1.0, side=1.0) -> BoundarySpec:
    corners = [
        (side * math.cos(math.pi * k / 3.0), side * math.sin(math.pi * k / 3.0))
        for k in range(6)
    ]
    verts = _segment_polyline(corners, h)
    return build_spec([(verts, h)])


def annulus(h=0.25, r_outer=2.0, r_inner=1.0) -> BoundarySpec:
    """Outer CCW circle with a CW circular hole."""
    n_out = max(8, round(2.0 * math.pi * r_outer / h))
    outer = [
        (r_outer * math.cos(2.0 * math.pi * k / n_out), r_outer * math.sin(2.0 * math.pi * k / n_out))
        for k in range(n_out)
    ]
    n_in = max(8, round(2.0 * math.pi * r_inner / h))
    inner = [
        (r_inner * math.cos(-2.0 * math.pi * k / n_in), r_inner * math.sin(-2.0 * math.pi * k / n_in))
        for k in range(n_in)
    ]
    return build_spec([(outer, h), (inner, h)])


GENERATORS = {
    "square": square,
    "l_shape": l_shape,
    "gear": gear_star,
    "disk": disk,
    "hexagon": hexagon,
    "annulus": annulus,
}
