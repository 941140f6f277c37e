"""2D geometric kernel: distances, intersections, and triangle measures.

Points are plain ``(x, y)`` tuples of floats. Every function is a pure
function of immutable inputs, so the kernel is safe to call from any
number of workers concurrently.

Sign tests classify a signed area as zero when its magnitude falls below
``REL_EPS`` times the magnitude of the products that formed it, which
keeps the predicates scale-free. Where an absolute length tolerance is
needed (degeneracy checks) callers may pass one explicitly; the meshing
pipeline uses ``REL_EPS`` times the bounding-box diagonal of the domain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import GeometryError

REL_EPS = 1e-12

Point = tuple[float, float]


@dataclass(slots=True)
class Front:
    """An oriented boundary edge of the unmeshed region.

    ``a`` and ``b`` are the coordinates of ``vertex_ids[0]`` and
    ``vertex_ids[1]``. The unmeshed region lies to the left when walking
    a -> b and ``normal`` is the unit left normal. ``creation_id`` is a
    global monotone counter that never changes; ``gi`` is the
    decomposition-invariant global index of the current iteration and is
    reassigned whenever the live front set changes.
    """

    vertex_ids: tuple[int, int]
    a: Point
    b: Point
    normal: Point
    h: float
    creation_id: int
    gi: int = -1

    @property
    def midpoint(self) -> Point:
        return ((self.a[0] + self.b[0]) / 2.0, (self.a[1] + self.b[1]) / 2.0)

    @property
    def length(self) -> float:
        return math.hypot(self.b[0] - self.a[0], self.b[1] - self.a[1])

    def key(self) -> frozenset:
        return frozenset(self.vertex_ids)


def make_front(vertex_ids, a, b, h, creation_id) -> Front:
    """Build a validated front with the unit left normal of a -> b."""
    for p in (a, b):
        if not (math.isfinite(p[0]) and math.isfinite(p[1])):
            raise GeometryError(f"non-finite front coordinate {p!r}")
    if vertex_ids[0] == vertex_ids[1]:
        raise GeometryError(f"front with repeated vertex id {vertex_ids!r}")
    dx = b[0] - a[0]
    dy = b[1] - a[1]
    length = math.hypot(dx, dy)
    scale = max(abs(a[0]), abs(a[1]), abs(b[0]), abs(b[1]), 1.0)
    if length <= REL_EPS * scale:
        raise GeometryError(f"zero-length front {a!r}-{b!r}")
    normal = (-dy / length, dx / length)
    return Front(tuple(vertex_ids), a, b, normal, h, creation_id)


@dataclass(slots=True)
class Element:
    """A committed triangle. ``owner_rank`` follows the current partition.

    ``box`` caches the background-grid cell of the centroid at commit
    time; it feeds load indicators and ownership, never the mesh itself.
    """

    vertex_ids: tuple[int, int, int]
    owner_rank: int
    centroid: Point
    box: int = -1


def orient(a: Point, b: Point, c: Point) -> float:
    """Twice the signed area of triangle abc; > 0 when c is left of a -> b."""
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def orient_sign(a: Point, b: Point, c: Point) -> int:
    """Sign of orient() with a magnitude-adaptive zero band."""
    detl = (b[0] - a[0]) * (c[1] - a[1])
    detr = (b[1] - a[1]) * (c[0] - a[0])
    det = detl - detr
    if abs(det) <= REL_EPS * (abs(detl) + abs(detr)):
        return 0
    return 1 if det > 0.0 else -1


def _check_segment(a: Point, b: Point) -> None:
    scale = max(abs(a[0]), abs(a[1]), abs(b[0]), abs(b[1]), 1.0)
    if math.hypot(b[0] - a[0], b[1] - a[1]) <= REL_EPS * scale:
        raise GeometryError(f"degenerate zero-length segment {a!r}-{b!r}")


def _on_segment_collinear(a: Point, b: Point, p: Point) -> bool:
    # p is assumed collinear with a-b; test membership in the closed segment
    # along the dominant axis.
    if abs(b[0] - a[0]) >= abs(b[1] - a[1]):
        lo, hi = (a[0], b[0]) if a[0] <= b[0] else (b[0], a[0])
        return lo <= p[0] <= hi
    lo, hi = (a[1], b[1]) if a[1] <= b[1] else (b[1], a[1])
    return lo <= p[1] <= hi


def segments_touch(a0: Point, a1: Point, b0: Point, b1: Point) -> bool:
    """True iff the closed segments share any point (no adjacency exemption)."""
    d1 = orient_sign(b0, b1, a0)
    d2 = orient_sign(b0, b1, a1)
    d3 = orient_sign(a0, a1, b0)
    d4 = orient_sign(a0, a1, b1)
    if d1 * d2 < 0 and d3 * d4 < 0:
        return True
    if d1 == 0 and _on_segment_collinear(b0, b1, a0):
        return True
    if d2 == 0 and _on_segment_collinear(b0, b1, a1):
        return True
    if d3 == 0 and _on_segment_collinear(a0, a1, b0):
        return True
    if d4 == 0 and _on_segment_collinear(a0, a1, b1):
        return True
    return False


def segments_intersect(a0: Point, a1: Point, b0: Point, b1: Point) -> bool:
    """Closed-segment intersection with the shared-endpoint adjacency exemption.

    Two distinct fronts meeting at exactly one shared endpoint (bitwise
    equal coordinates, as loop-adjacent fronts do) are NOT intersecting.
    Segments that coincide, overlap collinearly past a shared endpoint,
    or share any non-endpoint point are intersecting.
    """
    _check_segment(a0, a1)
    _check_segment(b0, b1)

    shared = []
    for p in (a0, a1):
        for q in (b0, b1):
            if p[0] == q[0] and p[1] == q[1]:
                shared.append((p, q))
    if len(shared) >= 2:
        return True  # same segment (possibly reversed)
    if len(shared) == 1:
        s = shared[0][0]
        pa = a1 if (s[0] == a0[0] and s[1] == a0[1]) else a0
        pb = b1 if (s[0] == b0[0] and s[1] == b0[1]) else b0
        if orient_sign(s, pa, pb) != 0:
            return False  # meet only at the shared endpoint
        # Collinear: intersect iff they extend past the shared point on
        # the same side.
        dot = (pa[0] - s[0]) * (pb[0] - s[0]) + (pa[1] - s[1]) * (pb[1] - s[1])
        return dot > 0.0
    return segments_touch(a0, a1, b0, b1)


def fronts_intersect(fa: Front, fb: Front) -> bool:
    """Spec predicate over fronts; see segments_intersect."""
    return segments_intersect(fa.a, fa.b, fb.a, fb.b)


def point_segment_distance(p: Point, a: Point, b: Point) -> float:
    abx = b[0] - a[0]
    aby = b[1] - a[1]
    denom = abx * abx + aby * aby
    if denom == 0.0:
        return math.hypot(p[0] - a[0], p[1] - a[1])
    t = ((p[0] - a[0]) * abx + (p[1] - a[1]) * aby) / denom
    if t <= 0.0:
        cx, cy = a
    elif t >= 1.0:
        cx, cy = b
    else:
        cx = a[0] + t * abx
        cy = a[1] + t * aby
    return math.hypot(p[0] - cx, p[1] - cy)


def dist_point_front(p: Point, f: Front) -> float:
    _check_segment(f.a, f.b)
    return point_segment_distance(p, f.a, f.b)


def _canonical_segment(a: Point, b: Point):
    return (a, b) if a <= b else (b, a)


def segment_segment_distance(a0: Point, a1: Point, b0: Point, b1: Point) -> float:
    """Minimum distance between closed segments; exactly symmetric in its operands."""
    # Canonicalize so the float result cannot depend on operand order.
    a0, a1 = _canonical_segment(a0, a1)
    b0, b1 = _canonical_segment(b0, b1)
    if (a0, a1) > (b0, b1):
        a0, a1, b0, b1 = b0, b1, a0, a1
    if segments_touch(a0, a1, b0, b1):
        return 0.0
    return min(
        point_segment_distance(a0, b0, b1),
        point_segment_distance(a1, b0, b1),
        point_segment_distance(b0, a0, a1),
        point_segment_distance(b1, a0, a1),
    )


def dist_front_front(fa: Front, fb: Front) -> float:
    _check_segment(fa.a, fa.b)
    _check_segment(fb.a, fb.b)
    return segment_segment_distance(fa.a, fa.b, fb.a, fb.b)


def point_strictly_in_triangle(p: Point, t0: Point, t1: Point, t2: Point) -> bool:
    """True iff p lies strictly inside the triangle (any orientation)."""
    s = orient_sign(t0, t1, t2)
    if s == 0:
        raise GeometryError(f"degenerate triangle {t0!r},{t1!r},{t2!r}")
    if s < 0:
        t1, t2 = t2, t1
    return (
        orient_sign(t0, t1, p) > 0
        and orient_sign(t1, t2, p) > 0
        and orient_sign(t2, t0, p) > 0
    )


def triangle_contains_segment_part(
    t0: Point, t1: Point, t2: Point, a: Point, b: Point
) -> bool:
    """True iff any part of segment a-b lies strictly inside triangle t0 t1 t2."""
    if point_strictly_in_triangle(a, t0, t1, t2):
        return True
    if point_strictly_in_triangle(b, t0, t1, t2):
        return True
    # Both endpoints outside or on the boundary: the segment can still pass
    # through the interior. Split it at every crossing with a triangle edge
    # and probe the midpoint of each piece.
    ts = [0.0, 1.0]
    abx = b[0] - a[0]
    aby = b[1] - a[1]
    for e0, e1 in ((t0, t1), (t1, t2), (t2, t0)):
        ex = e1[0] - e0[0]
        ey = e1[1] - e0[1]
        denom = abx * ey - aby * ex
        if denom == 0.0:
            continue  # parallel; a collinear lap contributes no interior part
        t = ((e0[0] - a[0]) * ey - (e0[1] - a[1]) * ex) / denom
        s = ((e0[0] - a[0]) * aby - (e0[1] - a[1]) * abx) / denom
        if 0.0 <= t <= 1.0 and 0.0 <= s <= 1.0:
            ts.append(t)
    ts.sort()
    for lo, hi in zip(ts, ts[1:]):
        if hi - lo <= REL_EPS:
            continue
        tm = (lo + hi) / 2.0
        q = (a[0] + tm * abx, a[1] + tm * aby)
        if point_strictly_in_triangle(q, t0, t1, t2):
            return True
    return False


def element_contains_front(tri, f: Front) -> bool:
    """Spec predicate: any part of front f strictly inside the triangle."""
    _check_segment(f.a, f.b)
    return triangle_contains_segment_part(tri[0], tri[1], tri[2], f.a, f.b)


def triangle_signed_area(t0: Point, t1: Point, t2: Point) -> float:
    return orient(t0, t1, t2) / 2.0


def inradius_circumradius(t0: Point, t1: Point, t2: Point) -> tuple[float, float]:
    """(inscribed radius, circumscribed radius) of a non-degenerate triangle."""
    if orient_sign(t0, t1, t2) == 0:
        raise GeometryError(f"degenerate (collinear) element {t0!r},{t1!r},{t2!r}")
    la = math.hypot(t1[0] - t0[0], t1[1] - t0[1])
    lb = math.hypot(t2[0] - t1[0], t2[1] - t1[1])
    lc = math.hypot(t0[0] - t2[0], t0[1] - t2[1])
    area = abs(orient(t0, t1, t2)) / 2.0
    semi = (la + lb + lc) / 2.0
    r_in = area / semi
    r_circ = la * lb * lc / (4.0 * area)
    return r_in, r_circ


def perpendicular_point(a: Point, b: Point, normal: Point, height: float) -> Point:
    """Point at distance ``height`` from the midpoint of a-b along ``normal``."""
    if height <= 0.0:
        raise ValueError(f"height must be positive, got {height!r}")
    mx = (a[0] + b[0]) / 2.0
    my = (a[1] + b[1]) / 2.0
    return (mx + height * normal[0], my + height * normal[1])


def perpendicular_candidate(f: Front, height: float) -> Point:
    """Spec construction: the advancing point on f's inward perpendicular."""
    return perpendicular_point(f.a, f.b, f.normal, height)


def signed_perpendicular_distance(a: Point, b: Point, p: Point) -> float:
    """Distance from p to line a-b, positive on the left (interior) side."""
    return orient(a, b, p) / math.hypot(b[0] - a[0], b[1] - a[1])
