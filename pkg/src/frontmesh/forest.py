"""Per-rank spatial index over fronts and the delta-layer ghost exchange.

Each rank owns a quadtree keyed by front midpoints (one front per leaf,
with a small bucket only when the maximum depth is hit). Range queries
are exact: the tree prunes with an inflated bounding box and then
filters candidates with the true segment-segment distance, so the result
equals a linear scan by construction. Results are sorted by global index
so downstream iteration order never depends on insertion order.

Ghost exchange packs fronts into a fixed-layout byte record so payloads
are reproducible byte streams; a rank's ghosts are exactly the fronts
whose grid cell lies within ``delta`` Chebyshev layers of a cell the
rank owns.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field

from .errors import InvariantError
from .geometry import Front, segment_segment_distance
from .sfc import BackgroundGrid, Partition, hilbert_index

MAX_DEPTH = 24
MAX_BUCKET = 8

# gi, vid0, vid1, ax, ay, bx, by, nx, ny, h, creation_id
GHOST_RECORD = struct.Struct("<qqq7dq")


@dataclass(frozen=True, slots=True)
class Rect:
    xmin: float
    ymin: float
    xmax: float
    ymax: float

    def contains(self, p) -> bool:
        return self.xmin <= p[0] <= self.xmax and self.ymin <= p[1] <= self.ymax

    def overlaps(self, other: "Rect") -> bool:
        return (
            self.xmin <= other.xmax
            and other.xmin <= self.xmax
            and self.ymin <= other.ymax
            and other.ymin <= self.ymax
        )


class _Node:
    __slots__ = ("rect", "depth", "entries", "children")

    def __init__(self, rect: Rect, depth: int):
        self.rect = rect
        self.depth = depth
        self.entries: list[Front] | None = []
        self.children: list[_Node] | None = None

    def _child_index(self, p) -> int:
        cx = (self.rect.xmin + self.rect.xmax) / 2.0
        cy = (self.rect.ymin + self.rect.ymax) / 2.0
        return (1 if p[0] >= cx else 0) + (2 if p[1] >= cy else 0)

    def _split(self):
        cx = (self.rect.xmin + self.rect.xmax) / 2.0
        cy = (self.rect.ymin + self.rect.ymax) / 2.0
        r = self.rect
        rects = (
            Rect(r.xmin, r.ymin, cx, cy),
            Rect(cx, r.ymin, r.xmax, cy),
            Rect(r.xmin, cy, cx, r.ymax),
            Rect(cx, cy, r.xmax, r.ymax),
        )
        self.children = [_Node(rc, self.depth + 1) for rc in rects]
        entries = self.entries
        self.entries = None
        for front in entries:
            self.children[self._child_index(front.midpoint)].insert(front)

    def insert(self, front: Front):
        if self.children is not None:
            self.children[self._child_index(front.midpoint)].insert(front)
            return
        self.entries.append(front)
        capacity = MAX_BUCKET if self.depth >= MAX_DEPTH else 1
        if len(self.entries) > capacity:
            if self.depth >= MAX_DEPTH:
                raise InvariantError(
                    f"more than {MAX_BUCKET} coincident front midpoints"
                )
            self._split()

    def remove(self, front: Front):
        if self.children is not None:
            self.children[self._child_index(front.midpoint)].remove(front)
            return
        self.entries.remove(front)


class FrontTree:
    """Quadtree over fronts, keyed by midpoint.

    Entries are addressed by ``key_attr`` (the per-iteration global index
    by default; the pipeline's persistent tree uses the stable creation
    id instead). Query results are always sorted by global index.
    """

    def __init__(self, region: Rect, key_attr: str = "gi"):
        self._root = _Node(region, 0)
        self._key_attr = key_attr
        self._by_key: dict[int, Front] = {}
        self._max_half_length = 0.0

    def _key(self, front: Front) -> int:
        return getattr(front, self._key_attr)

    def __len__(self) -> int:
        return len(self._by_key)

    def __contains__(self, key: int) -> bool:
        return key in self._by_key

    def get(self, key: int) -> Front:
        return self._by_key[key]

    def fronts(self):
        return self._by_key.values()

    def insert(self, front: Front) -> None:
        key = self._key(front)
        if key in self._by_key:
            raise InvariantError(f"duplicate insert of front key {key}")
        if not self._root.rect.contains(front.midpoint):
            raise InvariantError(
                f"front midpoint {front.midpoint!r} outside tree region"
            )
        self._root.insert(front)
        self._by_key[key] = front
        half = front.length / 2.0
        if half > self._max_half_length:
            self._max_half_length = half

    def remove(self, key: int) -> None:
        front = self._by_key.pop(key, None)
        if front is None:
            raise InvariantError(f"remove of absent front key {key}")
        self._root.remove(front)
        # _max_half_length stays a (safe) upper bound after removals.

    def query_near_segment(self, a, b, radius: float, exclude_key=None) -> list[Front]:
        """Fronts with segment distance strictly below ``radius``, sorted by gi."""
        margin = radius + self._max_half_length
        margin += 1e-9 * margin
        probe = Rect(
            min(a[0], b[0]) - margin,
            min(a[1], b[1]) - margin,
            max(a[0], b[0]) + margin,
            max(a[1], b[1]) + margin,
        )
        out = []
        stack = [self._root]
        key = self._key
        while stack:
            node = stack.pop()
            if not node.rect.overlaps(probe):
                continue
            if node.children is not None:
                stack.extend(node.children)
                continue
            for front in node.entries:
                if exclude_key is not None and key(front) == exclude_key:
                    continue
                if not probe.contains(front.midpoint):
                    continue
                if segment_segment_distance(a, b, front.a, front.b) < radius:
                    out.append(front)
        out.sort(key=lambda f: f.gi)
        return out


def neighbor_query(tree: FrontTree, front: Front, radius: float) -> list[Front]:
    """Neighbor set of a front: all indexed fronts within ``radius``, excluding it."""
    if radius <= 0.0:
        raise ValueError("radius must be positive")
    return tree.query_near_segment(front.a, front.b, radius, exclude_key=tree._key(front))


def required_delta(box_edge: float, h_max: float, gamma_factor: float) -> int:
    """Ghost layer count needed to cover a reach of gamma_factor * h_max."""
    if box_edge <= 0 or h_max <= 0 or gamma_factor <= 0:
        raise ValueError("required_delta needs positive inputs")
    return max(1, math.ceil(gamma_factor * h_max / box_edge))


def pack_fronts(fronts) -> bytes:
    """Serialize fronts in ascending gi order into fixed-layout records."""
    parts = []
    for f in sorted(fronts, key=lambda f: f.gi):
        parts.append(
            GHOST_RECORD.pack(
                f.gi,
                f.vertex_ids[0],
                f.vertex_ids[1],
                f.a[0],
                f.a[1],
                f.b[0],
                f.b[1],
                f.normal[0],
                f.normal[1],
                f.h,
                f.creation_id,
            )
        )
    return b"".join(parts)


def unpack_fronts(payload: bytes) -> list[Front]:
    out = []
    for rec in GHOST_RECORD.iter_unpack(payload):
        gi, v0, v1, ax, ay, bx, by, nx, ny, h, creation_id = rec
        out.append(
            Front(
                vertex_ids=(v0, v1),
                a=(ax, ay),
                b=(bx, by),
                normal=(nx, ny),
                h=h,
                creation_id=creation_id,
                gi=gi,
            )
        )
    return out


@dataclass(slots=True)
class OverlapSet:
    """A rank's owned fronts plus its delta-layer ghost fronts."""

    rank: int
    delta: int
    owned: list[Front]
    ghosts: list[Front] = field(default_factory=list)
    ghost_source: dict[int, int] = field(default_factory=dict)  # gi -> source rank

    def all_fronts(self):
        yield from self.owned
        yield from self.ghosts


def _ghost_recipients(cell, delta, grid: BackgroundGrid, partition: Partition):
    """Ranks owning any cell within ``delta`` Chebyshev layers of ``cell``."""
    n = grid.cells_per_side
    cx, cy = cell
    ranks = set()
    for x in range(max(0, cx - delta), min(n - 1, cx + delta) + 1):
        for y in range(max(0, cy - delta), min(n - 1, cy + delta) + 1):
            ranks.add(partition.owner_of_box(hilbert_index(x, y, grid.level)))
    return ranks


def build_overlap(
    partition: Partition,
    owned_by_rank: list[list[Front]],
    grid: BackgroundGrid,
    delta: int,
) -> list[OverlapSet]:
    """Construct every rank's ghost set by a pack/unpack exchange.

    Pure function of (partition, front set, delta): a front becomes a
    ghost of rank j exactly when its midpoint cell is within ``delta``
    Chebyshev layers of a cell rank j owns. Payload bytes are packed per
    (source, destination) pair in ascending gi order.
    """
    n_ranks = partition.n_ranks
    outboxes: dict[tuple[int, int], list[Front]] = {}
    for source, owned in enumerate(owned_by_rank):
        for front in owned:
            cell = grid.cell_of_point(front.midpoint)
            for dest in _ghost_recipients(cell, delta, grid, partition):
                if dest != source:
                    outboxes.setdefault((source, dest), []).append(front)

    overlaps = [
        OverlapSet(rank=r, delta=delta, owned=list(owned_by_rank[r]))
        for r in range(n_ranks)
    ]
    # Apply messages in (source, dest) order so ghost lists are reproducible.
    for source, dest in sorted(outboxes):
        ghosts = unpack_fronts(pack_fronts(outboxes[(source, dest)]))
        target = overlaps[dest]
        for ghost in ghosts:
            target.ghosts.append(ghost)
            target.ghost_source[ghost.gi] = source
    for overlap in overlaps:
        overlap.ghosts.sort(key=lambda f: f.gi)
    return overlaps
