"""Candidate generation: the best legal advancement for a single front.

For a front f with local scale h, two families of advancing points are
evaluated against its neighbor set:

* new points on the inward perpendicular at heights
  ``{1.0, 0.8, 0.6} * (sqrt(3)/2) * h`` (criterion A), and
* existing vertices of neighbor fronts within reach
  ``R(h) = min(3h, 1.5 h_max)`` of f's midpoint (criterion B).

The returned candidate maximizes the tentative element quality; exact
ties prefer vertex reuse, then the smaller vertex id, then the lower
perpendicular height. ``propose`` is a pure function and re-sorts its
neighbor list, so permuting the input cannot change the result.

A tentative new front that coincides with an existing neighbor front
(same vertex pair) is the cavity-closing case: the pipeline retires that
front instead of creating a duplicate, so intersection checks skip it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .geometry import (
    Front,
    orient,
    point_segment_distance,
    segment_segment_distance,
    segments_intersect,
    signed_perpendicular_distance,
    triangle_contains_segment_part,
    inradius_circumradius,
)

SQRT3_2 = math.sqrt(3.0) / 2.0

KIND_NEW_POINT = "new_point"
KIND_EXISTING_VERTEX = "existing_vertex"


@dataclass(frozen=True, slots=True)
class AdvanceParams:
    """Tunable thresholds for advancement legality and sizing."""

    h_min: float
    h_max: float
    beta1: float = 0.40
    beta2: float = 0.15
    eta: float = 0.15
    epsilon: float = 0.5
    gamma_factor: float = 1.5
    r_scale_local: float = 3.0
    r_scale_global: float = 1.5
    height_factors: tuple[float, ...] = (1.0, 0.8, 0.6)
    check_mutual_obstruction: bool = False

    def __post_init__(self):
        if not (0.0 < self.beta2 <= self.beta1 < 1.0):
            raise ValueError(
                f"require 0 < beta2 <= beta1 < 1, got ({self.beta1}, {self.beta2})"
            )
        if not (0.0 < self.eta < 1.0):
            raise ValueError(f"require 0 < eta < 1, got {self.eta}")
        if not (0.0 < self.h_min <= self.h_max):
            raise ValueError(f"require 0 < h_min <= h_max, got ({self.h_min}, {self.h_max})")
        if self.epsilon <= 0.0:
            raise ValueError("epsilon must be positive")

    def gamma(self, h: float) -> float:
        """Neighbor search radius for a front of local scale h."""
        return self.gamma_factor * h

    def r_threshold(self, h: float) -> float:
        """Reach limit for reusing an existing vertex."""
        return min(self.r_scale_local * h, self.r_scale_global * self.h_max)

    def min_element_area(self) -> float:
        """Area floor every committed element must clear (termination bound)."""
        return self.epsilon * self.eta * self.h_min * self.h_min


@dataclass(frozen=True, slots=True)
class Candidate:
    """A tentative element (front, point) with its quality and area."""

    front_gi: int
    point: tuple[float, float]
    kind: str
    vertex_id: int  # -1 for new points
    alpha: float
    area: float
    h: float  # local scale of the advanced front (conflict radius input)
    height_factor: float = 0.0  # 0 for vertex reuse

    def sort_key(self):
        # Quality first; exact ties prefer vertex reuse, then the smaller
        # vertex id (reuse) or the lower perpendicular height (new point).
        if self.kind == KIND_EXISTING_VERTEX:
            return (-self.alpha, 0, float(self.vertex_id))
        return (-self.alpha, 1, self.height_factor)


def _coincides(front: Front, p, q) -> bool:
    """Exact coincidence of segment p-q with the front's segment."""
    return (front.a == p and front.b == q) or (front.a == q and front.b == p)


def _new_front_conflicts(p, q, neighbors, front: Front):
    """Intersection of tentative new front p-q with any non-coincident neighbor."""
    for nb in neighbors:
        if _coincides(nb, p, q):
            continue  # cavity closing: this neighbor gets retired, not crossed
        if segments_intersect(p, q, nb.a, nb.b):
            return True
    return False


def _element_swallows_neighbor(front: Front, p, neighbors) -> bool:
    for nb in neighbors:
        if triangle_contains_segment_part(front.a, front.b, p, nb.a, nb.b):
            return True
    return False


def _vertex_clearance_ok(front: Front, p, neighbors, floor, skip_ids) -> bool:
    """Every neighbor vertex not part of the element stays ``floor`` away
    from both tentative new fronts."""
    a, b = front.a, front.b
    for nb in neighbors:
        for vid, q in ((nb.vertex_ids[0], nb.a), (nb.vertex_ids[1], nb.b)):
            if vid in skip_ids or q == a or q == b or q == p:
                continue
            if point_segment_distance(q, a, p) < floor:
                return False
            if point_segment_distance(q, p, b) < floor:
                return False
    return True


def check_criterion_a(front: Front, p, neighbors, params: AdvanceParams) -> bool:
    """Legality of advancing front with a newly created point p."""
    h = front.h
    if signed_perpendicular_distance(front.a, front.b, p) < params.eta * h:
        return False
    floor = params.beta1 * h
    for nb in neighbors:
        if point_segment_distance(p, nb.a, nb.b) < floor:
            return False
    if not _vertex_clearance_ok(front, p, neighbors, floor, skip_ids=set(front.vertex_ids)):
        return False
    if _new_front_conflicts(front.a, p, neighbors, front):
        return False
    if _new_front_conflicts(p, front.b, neighbors, front):
        return False
    if _element_swallows_neighbor(front, p, neighbors):
        return False
    return True


def _mutually_obstructs(front: Front, p, neighbors, params: AdvanceParams) -> bool:
    """Optional check: a new front facing an existing one across a gap too
    small for any further element."""
    for new_a, new_b in ((front.a, p), (p, front.b)):
        for nb in neighbors:
            if nb.a in (new_a, new_b) or nb.b in (new_a, new_b):
                continue
            gap = segment_segment_distance(new_a, new_b, nb.a, nb.b)
            if 0.0 < gap < params.eta * min(front.h, nb.h):
                return True
    return False


def check_criterion_b(
    front: Front, vertex_id: int, v, neighbors, params: AdvanceParams
) -> bool:
    """Legality of advancing front by reusing existing vertex v."""
    h = front.h
    mx, my = front.midpoint
    if math.hypot(v[0] - mx, v[1] - my) > params.r_threshold(h):
        return False
    if signed_perpendicular_distance(front.a, front.b, v) < params.eta * h:
        return False
    skip = set(front.vertex_ids)
    skip.add(vertex_id)
    if not _vertex_clearance_ok(front, v, neighbors, params.beta2 * h, skip_ids=skip):
        return False
    if _new_front_conflicts(front.a, v, neighbors, front):
        return False
    if _new_front_conflicts(v, front.b, neighbors, front):
        return False
    if _element_swallows_neighbor(front, v, neighbors):
        return False
    if params.check_mutual_obstruction and _mutually_obstructs(front, v, neighbors, params):
        return False
    return True


def _tentative_candidate(front: Front, p, kind, vertex_id, params: AdvanceParams, height_factor=0.0):
    area = orient(front.a, front.b, p) / 2.0
    if area < params.min_element_area():
        return None  # below the termination-bound floor; cavity falls to merging
    r_in, r_circ = inradius_circumradius(front.a, front.b, p)
    alpha = min(1.0, 2.0 * r_in / r_circ)
    return Candidate(
        front_gi=front.gi,
        point=p,
        kind=kind,
        vertex_id=vertex_id,
        alpha=alpha,
        area=area,
        h=front.h,
        height_factor=height_factor,
    )


def propose(front: Front, neighbors, params: AdvanceParams):
    """Best legal candidate for the front, or None when nothing is legal."""
    neighbors = sorted(neighbors, key=lambda f: f.gi)
    best = None

    seen: set[int] = set(front.vertex_ids)
    for nb in neighbors:
        for vid, q in ((nb.vertex_ids[0], nb.a), (nb.vertex_ids[1], nb.b)):
            if vid in seen:
                continue
            seen.add(vid)
            if not check_criterion_b(front, vid, q, neighbors, params):
                continue
            cand = _tentative_candidate(front, q, KIND_EXISTING_VERTEX, vid, params)
            if cand is not None and (best is None or cand.sort_key() < best.sort_key()):
                best = cand

    mx, my = front.midpoint
    nx, ny = front.normal
    for factor in params.height_factors:
        height = factor * SQRT3_2 * front.h
        p = (mx + height * nx, my + height * ny)
        if not check_criterion_a(front, p, neighbors, params):
            continue
        cand = _tentative_candidate(front, p, KIND_NEW_POINT, -1, params, height_factor=factor)
        if cand is not None and (best is None or cand.sort_key() < best.sort_key()):
            best = cand

    return best
