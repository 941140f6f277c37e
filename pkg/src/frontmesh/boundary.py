"""Boundary ingestion and validation.

The native format is JSON: a list of closed vertex loops with optional
per-edge target scales. The outer loop must be counter-clockwise, hole
loops clockwise, no loop may self-intersect, and loops may not touch
each other. A small whitespace 'poly-text' format is also accepted:
blocks of ``x y [h]`` lines separated by blank lines, one block per
loop, comments starting with '#'.

Edges without an explicit scale default to their own length; scales are
clamped into [h_min, h_max] with a warning rather than an error.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .errors import BoundaryError
from .geometry import Point, segments_intersect

FORMAT_TAG = "frontmesh-boundary-v1"


@dataclass(slots=True)
class Loop:
    vertices: list[Point]
    h: list[float]  # per edge, len(vertices) entries (edge i: v[i] -> v[i+1])

    @property
    def signed_area(self) -> float:
        total = 0.0
        verts = self.vertices
        n = len(verts)
        for i in range(n):
            ax, ay = verts[i]
            bx, by = verts[(i + 1) % n]
            total += ax * by - bx * ay
        return total / 2.0


@dataclass(slots=True)
class BoundarySpec:
    loops: list[Loop]
    h_min: float
    h_max: float
    warnings: list[str] = field(default_factory=list)

    @property
    def area(self) -> float:
        return sum(loop.signed_area for loop in self.loops)

    def bbox(self):
        xs = [p[0] for loop in self.loops for p in loop.vertices]
        ys = [p[1] for loop in self.loops for p in loop.vertices]
        return (min(xs), min(ys), max(xs), max(ys))

    def edge_count(self) -> int:
        return sum(len(loop.vertices) for loop in self.loops)


def _validate_loop_geometry(loop_index: int, vertices: list[Point]) -> None:
    n = len(vertices)
    if n < 3:
        raise BoundaryError(
            f"loop {loop_index}: needs at least 3 vertices, got {n}",
            loop_index=loop_index,
        )
    for i, p in enumerate(vertices):
        if not (math.isfinite(p[0]) and math.isfinite(p[1])):
            raise BoundaryError(
                f"loop {loop_index}: non-finite vertex {i}",
                loop_index=loop_index,
                edge_index=i,
            )
    for i in range(n):
        if vertices[i] == vertices[(i + 1) % n]:
            raise BoundaryError(
                f"loop {loop_index}: zero-length edge {i}",
                loop_index=loop_index,
                edge_index=i,
            )
    # Self-intersection: any two non-adjacent edges sharing a point, or
    # adjacent edges overlapping past their shared vertex.
    edges = [(vertices[i], vertices[(i + 1) % n]) for i in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            if segments_intersect(*edges[i], *edges[j]):
                raise BoundaryError(
                    f"loop {loop_index}: edges {i} and {j} intersect",
                    loop_index=loop_index,
                    edge_index=i,
                )


def _validate_orientations(loops: list[Loop]) -> None:
    areas = [loop.signed_area for loop in loops]
    outer = max(range(len(loops)), key=lambda i: abs(areas[i]))
    if areas[outer] <= 0:
        raise BoundaryError(
            f"loop {outer}: outer loop must be counter-clockwise",
            loop_index=outer,
        )
    for i, area in enumerate(areas):
        if i != outer and area >= 0:
            raise BoundaryError(
                f"loop {i}: hole loop must be clockwise",
                loop_index=i,
            )


def _validate_loop_separation(loops: list[Loop]) -> None:
    for i in range(len(loops)):
        for j in range(i + 1, len(loops)):
            ei = [
                (loops[i].vertices[k], loops[i].vertices[(k + 1) % len(loops[i].vertices)])
                for k in range(len(loops[i].vertices))
            ]
            ej = [
                (loops[j].vertices[k], loops[j].vertices[(k + 1) % len(loops[j].vertices)])
                for k in range(len(loops[j].vertices))
            ]
            for a0, a1 in ei:
                for b0, b1 in ej:
                    if segments_intersect(a0, a1, b0, b1):
                        raise BoundaryError(
                            f"loops {i} and {j} touch or intersect", loop_index=i
                        )


def build_spec(raw_loops, h_min=None, h_max=None) -> BoundarySpec:
    """Validate raw loop data into a BoundarySpec.

    ``raw_loops`` is a list of (vertices, h_spec) where ``h_spec`` is a
    scalar, a per-edge list, or None (edge lengths). h bounds default to
    the extremes of the resulting edge scales.
    """
    loops: list[Loop] = []
    warnings: list[str] = []
    for loop_index, (vertices, h_spec) in enumerate(raw_loops):
        vertices = [(float(x), float(y)) for x, y in vertices]
        _validate_loop_geometry(loop_index, vertices)
        n = len(vertices)
        lengths = [
            math.dist(vertices[i], vertices[(i + 1) % n]) for i in range(n)
        ]
        if h_spec is None:
            h = list(lengths)
        elif isinstance(h_spec, (int, float)):
            h = [float(h_spec)] * n
        else:
            h = [float(v) for v in h_spec]
            if len(h) != n:
                raise BoundaryError(
                    f"loop {loop_index}: {len(h)} scales for {n} edges",
                    loop_index=loop_index,
                )
        if any(v <= 0 for v in h):
            raise BoundaryError(
                f"loop {loop_index}: non-positive edge scale", loop_index=loop_index
            )
        loops.append(Loop(vertices=vertices, h=h))

    _validate_orientations(loops)
    _validate_loop_separation(loops)

    all_h = [v for loop in loops for v in loop.h]
    lo = min(all_h) if h_min is None else float(h_min)
    hi = max(all_h) if h_max is None else float(h_max)
    if not (0 < lo <= hi):
        raise BoundaryError(f"invalid scale bounds [{lo}, {hi}]")
    for loop_index, loop in enumerate(loops):
        for i, v in enumerate(loop.h):
            clamped = min(max(v, lo), hi)
            if clamped != v:
                warnings.append(
                    f"loop {loop_index} edge {i}: scale {v:g} clamped to {clamped:g}"
                )
                loop.h[i] = clamped
    return BoundarySpec(loops=loops, h_min=lo, h_max=hi, warnings=warnings)


def _loops_from_json(doc) -> list:
    if not isinstance(doc, dict) or "loops" not in doc:
        raise BoundaryError("boundary JSON must be an object with a 'loops' array")
    tag = doc.get("format", FORMAT_TAG)
    if tag != FORMAT_TAG:
        raise BoundaryError(f"unsupported boundary format tag {tag!r}")
    raw = []
    for loop in doc["loops"]:
        raw.append((loop["vertices"], loop.get("h")))
    return raw, doc.get("h_min"), doc.get("h_max")


def _loops_from_poly_text(text: str) -> list:
    blocks: list[list[str]] = [[]]
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            if blocks[-1]:
                blocks.append([])
            continue
        blocks[-1].append(line)
    if blocks and not blocks[-1]:
        blocks.pop()
    raw = []
    for block in blocks:
        vertices = []
        hs = []
        any_h = False
        for line in block:
            fields = line.split()
            if len(fields) not in (2, 3):
                raise BoundaryError(f"poly-text line {line!r}: expected 'x y [h]'")
            vertices.append((float(fields[0]), float(fields[1])))
            if len(fields) == 3:
                hs.append(float(fields[2]))
                any_h = True
            else:
                hs.append(None)
        if any_h and any(v is None for v in hs):
            raise BoundaryError("poly-text loop mixes edges with and without h")
        raw.append((vertices, hs if any_h else None))
    return raw, None, None


def load_boundary(path, fmt=None, h_min=None, h_max=None) -> BoundarySpec:
    """Load and validate a boundary file (native-json or poly-text)."""
    text = open(path, "r", encoding="utf-8").read()
    if fmt is None:
        fmt = "native-json" if str(path).endswith(".json") else "poly-text"
    if fmt == "native-json":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise BoundaryError(f"boundary JSON does not parse: {exc}") from exc
        raw, doc_min, doc_max = _loops_from_json(doc)
    elif fmt == "poly-text":
        raw, doc_min, doc_max = _loops_from_poly_text(text)
    else:
        raise BoundaryError(f"unknown boundary format {fmt!r}")
    return build_spec(
        raw,
        h_min=h_min if h_min is not None else doc_min,
        h_max=h_max if h_max is not None else doc_max,
    )


def dump_boundary(spec: BoundarySpec, path) -> None:
    doc = {
        "format": FORMAT_TAG,
        "h_min": spec.h_min,
        "h_max": spec.h_max,
        "loops": [
            {"vertices": [list(v) for v in loop.vertices], "h": list(loop.h)}
            for loop in spec.loops
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")
