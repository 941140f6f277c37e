"""Hilbert-curve background grid, domain decomposition, and global front indices.

The background grid covers the domain bounding box with a level-L
Cartesian grid of ``2^L x 2^L`` cells, ordered by a Hilbert curve. The
curve convention is frozen (see ``hilbert_index``) and pinned by golden
vectors in the test suite: at level 1 the visit order is
(0,0), (0,1), (1,1), (1,0).

A partition assigns each rank one contiguous, ascending range of curve
indices. The global index of a front is its rank under the total order
(curve index of the cell holding its midpoint, creation id); that order
does not mention the partition at all, which is what makes it invariant
under repartitioning.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field

from .errors import GeometryError
from .geometry import Front, Point

MIN_LEVEL = 2
MAX_LEVEL = 16


def hilbert_index(x: int, y: int, level: int) -> int:
    """Map cell coordinates to the curve index in [0, 4**level).

    Frozen convention: the base cell visits (0,0), (0,1), (1,1), (1,0),
    i.e. the level-1 "U" opens toward +x. Consecutive indices are always
    face-adjacent cells.
    """
    n = 1 << level
    if not (0 <= x < n and 0 <= y < n):
        raise ValueError(f"cell ({x}, {y}) out of range for level {level}")
    d = 0
    s = n >> 1
    while s > 0:
        rx = 1 if (x & s) > 0 else 0
        ry = 1 if (y & s) > 0 else 0
        d += s * s * ((3 * rx) ^ ry)
        if ry == 0:
            if rx == 1:
                x = s - 1 - x
                y = s - 1 - y
            x, y = y, x
        s >>= 1
    return d


def hilbert_coords(index: int, level: int) -> tuple[int, int]:
    """Inverse of hilbert_index."""
    n = 1 << level
    if not (0 <= index < n * n):
        raise ValueError(f"index {index} out of range for level {level}")
    x = y = 0
    t = index
    s = 1
    while s < n:
        rx = 1 & (t // 2)
        ry = 1 & (t ^ rx)
        if ry == 0:
            if rx == 1:
                x = s - 1 - x
                y = s - 1 - y
            x, y = y, x
        x += s * rx
        y += s * ry
        t //= 4
        s <<= 1
    return x, y


@dataclass(frozen=True, slots=True)
class BackgroundGrid:
    """Level-L Hilbert-ordered cell cover of the domain bounding box.

    The grid square is anchored at the bbox min corner with side equal to
    the longest bbox edge, so cells are square and ``box_edge`` matches
    the spec definition ``longest_edge / 2**level``.
    """

    xmin: float
    ymin: float
    xmax: float
    ymax: float
    level: int

    @property
    def side(self) -> float:
        return max(self.xmax - self.xmin, self.ymax - self.ymin)

    @property
    def box_edge(self) -> float:
        return self.side / (1 << self.level)

    @property
    def cells_per_side(self) -> int:
        return 1 << self.level

    @property
    def box_count(self) -> int:
        return 1 << (2 * self.level)

    def cell_of_point(self, p: Point) -> tuple[int, int]:
        """Grid cell holding p. Boundary ties resolve toward the lower cell."""
        if not (self.xmin <= p[0] <= self.xmax and self.ymin <= p[1] <= self.ymax):
            raise GeometryError(f"point {p!r} outside grid bbox")
        n = self.cells_per_side
        edge = self.box_edge
        cx = math.ceil((p[0] - self.xmin) / edge) - 1
        cy = math.ceil((p[1] - self.ymin) / edge) - 1
        cx = 0 if cx < 0 else (n - 1 if cx > n - 1 else cx)
        cy = 0 if cy < 0 else (n - 1 if cy > n - 1 else cy)
        return cx, cy

    def box_of_point(self, p: Point) -> int:
        cx, cy = self.cell_of_point(p)
        return hilbert_index(cx, cy, self.level)


def box_of_point(p: Point, grid: BackgroundGrid) -> int:
    return grid.box_of_point(p)


def level_for_scale(h_max: float, bbox) -> int:
    """Smallest level whose box edge is at most 2*h_max, clamped to [2, 16]."""
    if h_max <= 0.0:
        raise ValueError("h_max must be positive")
    xmin, ymin, xmax, ymax = bbox
    longest = max(xmax - xmin, ymax - ymin)
    level = MIN_LEVEL
    while level < MAX_LEVEL and longest / (1 << level) > 2.0 * h_max:
        level += 1
    return level


@dataclass(frozen=True, slots=True)
class Partition:
    """Contiguous ascending half-open ranges of box indices, one per rank."""

    ranges: tuple[tuple[int, int], ...]
    n_ranks: int
    weight_empty_ranks: tuple[int, ...] = ()
    # cached range starts for owner lookup
    _starts: tuple[int, ...] = field(default=(), repr=False)

    def __post_init__(self):
        if len(self.ranges) != self.n_ranks:
            raise ValueError("one range per rank required")
        prev = None
        for start, stop in self.ranges:
            if start > stop:
                raise ValueError(f"inverted range ({start}, {stop})")
            if prev is not None and start != prev:
                raise ValueError("ranges must be contiguous and ascending")
            prev = stop
        object.__setattr__(self, "_starts", tuple(r[0] for r in self.ranges))

    @property
    def box_count(self) -> int:
        return self.ranges[-1][1]

    def owner_of_box(self, box: int) -> int:
        if not (0 <= box < self.box_count):
            raise ValueError(f"box {box} outside partition index space")
        return bisect_right(self._starts, box) - 1


def single_rank_partition(box_count: int) -> Partition:
    return Partition(ranges=((0, box_count),), n_ranks=1)


def _split_greedy(prefix, n_ranks):
    """Split points chosen nearest the ideal prefix-sum targets."""
    nboxes = len(prefix) - 1
    total = prefix[-1]
    splits = [0]
    for i in range(1, n_ranks):
        target = total * i / n_ranks
        k = bisect_right(prefix, target) - 1
        k = max(k, splits[-1])
        best = k
        if k + 1 <= nboxes and abs(prefix[k + 1] - target) < abs(prefix[k] - target):
            best = k + 1
        splits.append(min(best, nboxes))
    splits.append(nboxes)
    return splits


def _balance_ratio(prefix, splits):
    loads = [prefix[b] - prefix[a] for a, b in zip(splits, splits[1:])]
    top = max(loads)
    return (min(loads) / top) if top > 0 else 1.0


def _improve_balance(prefix, splits, max_passes=64):
    """Greedy +/-1 moves of interior split points while the min/max ratio improves."""
    best = _balance_ratio(prefix, splits)
    for _ in range(max_passes):
        improved = False
        for i in range(1, len(splits) - 1):
            for delta in (-1, 1):
                cand = splits[i] + delta
                if not (splits[i - 1] <= cand <= splits[i + 1]):
                    continue
                trial = splits[:i] + [cand] + splits[i + 1 :]
                ratio = _balance_ratio(prefix, trial)
                if ratio > best:
                    splits = trial
                    best = ratio
                    improved = True
        if not improved:
            break
    return splits


def partition_boxes(weights, n_ranks: int) -> Partition:
    """Greedy prefix-sum split of the box index space into n contiguous ranges.

    Ranks whose range carries zero total weight are flagged in
    ``weight_empty_ranks`` rather than rejected, so callers can degrade
    gracefully when n_ranks exceeds the populated boxes.
    """
    if n_ranks < 1:
        raise ValueError("n_ranks must be at least 1")
    weights = list(weights)
    prefix = [0.0]
    for w in weights:
        if w < 0:
            raise ValueError("box weights must be non-negative")
        prefix.append(prefix[-1] + w)
    if prefix[-1] <= 0:
        raise ValueError("total weight must be positive")

    splits = _split_greedy(prefix, n_ranks)
    splits = _improve_balance(prefix, splits)
    ranges = tuple((a, b) for a, b in zip(splits, splits[1:]))
    empty = tuple(
        i for i, (a, b) in enumerate(ranges) if prefix[b] - prefix[a] == 0.0
    )
    return Partition(ranges=ranges, n_ranks=n_ranks, weight_empty_ranks=empty)


@dataclass(frozen=True, slots=True)
class LoadIndicator:
    """Per-rank load: weighted front and element counts."""

    front_count: int
    element_count: int
    k_f: int = 3
    k_e: int = 1

    @property
    def W(self) -> float:
        return self.k_f * self.front_count + self.k_e * self.element_count


def needs_repartition(indicators) -> bool:
    """True iff the load balance criterion (min W > 0.5 max W) is violated."""
    ws = [ind.W for ind in indicators]
    if not ws:
        raise ValueError("at least one load indicator required")
    return min(ws) <= 0.5 * max(ws)


def front_sort_key(front: Front, grid: BackgroundGrid):
    return (grid.box_of_point(front.midpoint), front.creation_id)


def assign_global_indices(fronts, grid: BackgroundGrid) -> list:
    """Set ``gi`` on every front; returns the fronts sorted by global index.

    The order is (box of midpoint, creation id); creation ids are unique,
    so the order is total and identical for every decomposition.
    """
    indexed = sorted(fronts, key=lambda f: front_sort_key(f, grid))
    for gi, front in enumerate(indexed):
        front.gi = gi
    return indexed


def global_index(front: Front, fronts, partition: Partition, grid: BackgroundGrid) -> int:
    """Spec-shaped global index: local index within the owning rank plus offsets.

    Computed per the definition ``Id(f, k; n) + sum_{i<k} |F_i|`` so tests
    can verify it coincides with the partition-free total order.
    """
    per_rank: list[list] = [[] for _ in range(partition.n_ranks)]
    target = None
    for f in fronts:
        box = grid.box_of_point(f.midpoint)
        rank = partition.owner_of_box(box)
        per_rank[rank].append((box, f.creation_id, f))
        if f is front:
            target = (rank, box, f.creation_id)
    if target is None:
        raise ValueError("front not present in the supplied front set")
    rank, box, creation_id = target
    local = sorted(per_rank[rank])
    local_index = local.index((box, creation_id, front))
    offset = sum(len(per_rank[i]) for i in range(rank))
    return local_index + offset
