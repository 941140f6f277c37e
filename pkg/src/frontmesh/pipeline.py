"""End-to-end mesh generation over a logical-rank BSP runtime.

Every iteration is one superstep: (re)partition if due, assign global
indices, build the delta-layer overlap, propose one candidate per owned
front, resolve conflicts with the parallel MIS, and commit the accepted
candidates in ascending global index. Commit order, vertex numbering and
all floating-point reductions are tied to the global index order, which
is invariant under the decomposition, so the generated mesh is
bit-identical for every rank count and every repartition schedule.

Physical workers only execute per-rank pure tasks (see runtime.RankPool);
they cannot affect the result.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

from .advancer import AdvanceParams, Candidate, KIND_EXISTING_VERTEX, propose
from .boundary import BoundarySpec
from .errors import InvariantError
from .forest import (
    FrontTree,
    Rect,
    build_overlap,
    neighbor_query,
    pack_fronts,
    required_delta,
    unpack_fronts,
)
from .geometry import (
    Element,
    Front,
    make_front,
    orient,
    segments_intersect,
    triangle_contains_segment_part,
)
from .mis import build_conflict_graph, cpmis_run
from .runtime import RankPool
from .sfc import (
    BackgroundGrid,
    LoadIndicator,
    Partition,
    hilbert_index,
    level_for_scale,
    needs_repartition,
    partition_boxes,
)

log = logging.getLogger(__name__)

DIMENSION = 2
# Ghost reach is gamma(h_max) plus segment half-lengths on both sides; fronts
# stay near their own scale, so one extra h_max per endpoint is a safe slack.
DELTA_LENGTH_SLACK = 2.0
# Candidate points sit within 1.5*h_max of their front midpoint and conflict
# within 2*h_max of each other: 5*h_max covers any conflicting pair.
MIS_REACH_FACTOR = 5.0


@dataclass(frozen=True, slots=True)
class PipelineConfig:
    params: AdvanceParams
    n_ranks: int = 1
    workers: int = 1
    sfc_level: int | None = None
    mis_max_rounds: int | None = 10
    repartition_cadence: int = 5
    validate: bool = True


@dataclass(slots=True)
class RunStats:
    v0: float = 0.0
    iterations: int = 0
    termination_bound: int = 0
    commits: int = 0
    merge_events: int = 0
    guard_skips: int = 0
    stale_skips: int = 0
    min_commit_area: float = math.inf
    v_trace: list = field(default_factory=list)
    sfc_level: int = 0
    repartitions: int = 0


@dataclass(slots=True)
class MeshState:
    """A (possibly complete) mesh: global vertex store plus elements.

    ``fronts`` is empty exactly when generation finished. Vertex ids are
    list positions; boundary vertices are flagged and never move.
    """

    vertices: list
    vertex_is_boundary: list
    elements: list
    fronts: dict
    iteration: int
    volume_remaining: float
    grid: BackgroundGrid
    stats: RunStats


def termination_bound(params: AdvanceParams, v0: float, dimension: int = DIMENSION) -> int:
    """Iteration cap from the volume-decrement argument."""
    if v0 < 0:
        raise ValueError("enclosed volume must be non-negative")
    if v0 == 0:
        return 0
    return math.ceil(v0 / (params.epsilon * params.eta * params.h_min**dimension))


def _propose_rank_task(payload):
    """Worker task: propose a candidate for every owned front of one rank."""
    owned_bytes, ghost_bytes, params, region = payload
    owned = unpack_fronts(owned_bytes)
    ghosts = unpack_fronts(ghost_bytes)
    tree = FrontTree(Rect(*region))
    for front in owned:
        tree.insert(front)
    for front in ghosts:
        tree.insert(front)
    out = []
    for front in owned:  # ascending gi by pack order
        neighbors = neighbor_query(tree, front, params.gamma(front.h))
        cand = propose(front, neighbors, params)
        if cand is not None:
            out.append(cand)
    return out


class MeshRun:
    """Mutable generation state; ``step()`` executes one superstep."""

    def __init__(self, boundary: BoundarySpec, config: PipelineConfig, pool: RankPool | None = None):
        self.config = config
        self.params = config.params
        self.pool = pool or RankPool(config.workers)
        self._own_pool = pool is None

        xmin, ymin, xmax, ymax = boundary.bbox()
        level = config.sfc_level or level_for_scale(self.params.h_max, (xmin, ymin, xmax, ymax))
        self.grid = BackgroundGrid(xmin, ymin, xmax, ymax, level)
        side = self.grid.side
        self.region = (xmin, ymin, xmin + side, ymin + side)

        self.vertices: list = []
        self.vertex_is_boundary: list = []
        self.elements: list[Element] = []
        self.fronts: dict[int, Front] = {}
        self.front_key: dict[frozenset, int] = {}
        self.front_box: dict[int, int] = {}
        self.incident: dict[int, set] = {}
        self.next_creation_id = 0
        self.live_tree = FrontTree(Rect(*self.region), key_attr="creation_id")

        self.partition: Partition | None = None
        self.rank_front_count = [0] * config.n_ranks
        self.rank_element_count = [0] * config.n_ranks

        self.iteration = 0
        self._last_commits = 0
        self.stats = RunStats(sfc_level=level)
        self.volume_remaining = 0.0
        self._ingest(boundary)

        self.stats.v0 = self.volume_remaining
        self.stats.termination_bound = termination_bound(self.params, self.volume_remaining)

    # ----- ingestion -------------------------------------------------

    def _ingest(self, boundary: BoundarySpec) -> None:
        for loop in boundary.loops:
            base = len(self.vertices)
            n = len(loop.vertices)
            for p in loop.vertices:
                self.vertices.append((float(p[0]), float(p[1])))
                self.vertex_is_boundary.append(True)
            for i in range(n):
                self._create_front(base + i, base + (i + 1) % n, loop.h[i])
        self.volume_remaining = self._shoelace()
        if self.volume_remaining <= 0:
            raise InvariantError("boundary encloses no area")

    # ----- front bookkeeping -----------------------------------------

    def _create_front(self, va: int, vb: int, h: float) -> Front:
        key = frozenset((va, vb))
        if key in self.front_key:
            raise InvariantError(f"front {sorted(key)!r} already live")
        cid = self.next_creation_id
        self.next_creation_id += 1
        front = make_front((va, vb), self.vertices[va], self.vertices[vb], h, cid)
        self.fronts[cid] = front
        self.front_key[key] = cid
        self.incident.setdefault(va, set()).add(cid)
        self.incident.setdefault(vb, set()).add(cid)
        box = self.grid.box_of_point(front.midpoint)
        self.front_box[cid] = box
        self.live_tree.insert(front)
        if self.partition is not None:
            self.rank_front_count[self.partition.owner_of_box(box)] += 1
        return front

    def _retire_front(self, cid: int) -> Front:
        front = self.fronts.pop(cid)
        del self.front_key[front.key()]
        for v in front.vertex_ids:
            bag = self.incident[v]
            bag.discard(cid)
            if not bag:
                del self.incident[v]
        self.live_tree.remove(cid)
        box = self.front_box.pop(cid)
        if self.partition is not None:
            self.rank_front_count[self.partition.owner_of_box(box)] -= 1
        return front

    def _shoelace(self) -> float:
        # Ordered reduction over the live fronts; creation order is itself
        # decomposition invariant, so the float result is reproducible.
        total = 0.0
        for cid in sorted(self.fronts):
            f = self.fronts[cid]
            total += f.a[0] * f.b[1] - f.b[0] * f.a[1]
        return total / 2.0

    # ----- partitioning ----------------------------------------------

    def _repartition(self) -> None:
        weights = [0.0] * self.grid.box_count
        for box in self.front_box.values():
            weights[box] += 3.0
        for element in self.elements:
            weights[element.box] += 1.0
        self.partition = partition_boxes(weights, self.config.n_ranks)
        self.stats.repartitions += 1
        self.rank_front_count = [0] * self.config.n_ranks
        self.rank_element_count = [0] * self.config.n_ranks
        for box in self.front_box.values():
            self.rank_front_count[self.partition.owner_of_box(box)] += 1
        for element in self.elements:
            element.owner_rank = self.partition.owner_of_box(element.box)
            self.rank_element_count[element.owner_rank] += 1

    def _maybe_repartition(self) -> None:
        if self.partition is None:
            self._repartition()
            return
        due = (self.iteration % self.config.repartition_cadence) == 0 and self.iteration > 0
        indicators = [
            LoadIndicator(f, e)
            for f, e in zip(self.rank_front_count, self.rank_element_count)
        ]
        if due or needs_repartition(indicators):
            self._repartition()

    # ----- global indexing -------------------------------------------

    def _index_fronts(self) -> list[Front]:
        entries = sorted((self.front_box[cid], cid) for cid in self.fronts)
        indexed = []
        for gi, (_box, cid) in enumerate(entries):
            front = self.fronts[cid]
            front.gi = gi
            indexed.append(front)
        return indexed

    # ----- iteration -------------------------------------------------

    def step(self) -> bool:
        """One superstep; returns False when generation is complete."""
        if not self.fronts:
            return False
        if self.iteration >= self.stats.termination_bound:
            raise InvariantError(
                f"exceeded termination bound {self.stats.termination_bound}"
            )

        self._maybe_repartition()
        indexed = self._index_fronts()
        self._record_volume()
        if self.config.validate:
            self._check_loop_invariant()

        owned_by_rank: list[list[Front]] = [[] for _ in range(self.config.n_ranks)]
        owner_of_front: dict[int, int] = {}
        for front in indexed:
            rank = self.partition.owner_of_box(self.front_box[front.creation_id])
            owned_by_rank[rank].append(front)
            owner_of_front[front.gi] = rank

        delta = required_delta(
            self.grid.box_edge,
            self.params.h_max,
            self.params.gamma_factor + DELTA_LENGTH_SLACK,
        )
        overlaps = build_overlap(self.partition, owned_by_rank, self.grid, delta)

        payloads = [
            (pack_fronts(ov.owned), pack_fronts(ov.ghosts), self.params, self.region)
            for ov in overlaps
        ]
        per_rank_candidates = self.pool.map(_propose_rank_task, payloads)
        candidates: dict[int, Candidate] = {}
        for rank_cands in per_rank_candidates:
            for cand in rank_cands:
                candidates[cand.front_gi] = cand

        self.iteration += 1
        self.stats.iterations = self.iteration

        if not candidates:
            self._last_commits = 0
            self._merge_fallback(indexed)
            return True

        accepted = self._resolve_conflicts(candidates, owner_of_front, indexed)
        committed = self._commit(accepted, candidates, indexed, owner_of_front)
        if committed == 0:
            raise InvariantError("no candidate committed despite a nonempty accepted set")
        self._last_commits = committed
        return True

    def _record_volume(self) -> None:
        volume = self._shoelace()
        trace = self.stats.v_trace
        if trace and self._last_commits > 0 and volume >= trace[-1]:
            raise InvariantError(
                f"volume did not decrease after {self._last_commits} commits"
            )
        if trace and self._last_commits == 0 and volume > trace[-1]:
            log.info("volume drift %.3e after merge fallback", volume - trace[-1])
        trace.append(volume)
        self.volume_remaining = volume

    def _resolve_conflicts(self, candidates, owner_of_front, indexed):
        graph = build_conflict_graph(
            (gi, cand.point, cand.h) for gi, cand in sorted(candidates.items())
        )
        owner_of = {gi: owner_of_front[gi] for gi in candidates}
        universes = self._mis_universes(candidates, indexed)
        result = cpmis_run(
            graph,
            owner_of,
            self.config.n_ranks,
            max_rounds=self.config.mis_max_rounds,
            rank_universes=universes,
        )
        return result.accepted

    def _mis_universes(self, candidates, indexed):
        """Per-rank candidate visibility from the box-layer ghost exchange."""
        delta = required_delta(self.grid.box_edge, self.params.h_max, MIS_REACH_FACTOR)
        n = self.grid.cells_per_side
        level = self.grid.level
        universes = [set() for _ in range(self.config.n_ranks)]
        for gi in candidates:
            cx, cy = self.grid.cell_of_point(indexed[gi].midpoint)
            for x in range(max(0, cx - delta), min(n - 1, cx + delta) + 1):
                for y in range(max(0, cy - delta), min(n - 1, cy + delta) + 1):
                    rank = self.partition.owner_of_box(hilbert_index(x, y, level))
                    universes[rank].add(gi)
        return universes

    # ----- commit ----------------------------------------------------

    def _commit(self, accepted, candidates, indexed, owner_of_front) -> int:
        committed = 0
        for gi in accepted:  # ascending global index
            cand = candidates[gi]
            front = indexed[gi]
            if front.creation_id not in self.fronts:
                self.stats.stale_skips += 1  # zipped away earlier in this batch
                continue
            if not self._commit_guard(front, cand):
                self.stats.guard_skips += 1
                continue
            self._commit_one(front, cand, owner_of_front[gi])
            committed += 1
        return committed

    def _commit_guard(self, front: Front, cand: Candidate) -> bool:
        """Re-check hard geometry against the live front set.

        Earlier commits in the same batch may have created fronts the
        conflict graph did not rule out; the guard keeps the mesh valid
        and, because it runs in global-index order on identical state,
        keeps the outcome decomposition invariant.
        """
        p = cand.point
        radius = (
            self.params.r_threshold(front.h)
            + front.length
            + self.params.gamma(front.h)
        )
        nearby = self.live_tree.query_near_segment(
            front.a, front.b, radius, exclude_key=front.creation_id
        )
        a, b = front.a, front.b
        for nb in nearby:
            for s0, s1 in ((a, p), (p, b)):
                if (nb.a == s0 and nb.b == s1) or (nb.a == s1 and nb.b == s0):
                    continue  # will be zipped, not crossed
                if segments_intersect(s0, s1, nb.a, nb.b):
                    return False
            if triangle_contains_segment_part(a, b, p, nb.a, nb.b):
                return False
        return True

    def _commit_one(self, front: Front, cand: Candidate, owner_rank: int) -> None:
        v0, v1 = front.vertex_ids
        if cand.kind == KIND_EXISTING_VERTEX:
            vid = cand.vertex_id
            if self.vertices[vid] != cand.point:
                raise InvariantError(
                    f"vertex {vid} coordinates diverged from candidate point"
                )
        else:
            vid = len(self.vertices)
            self.vertices.append(cand.point)
            self.vertex_is_boundary.append(False)

        area = orient(front.a, front.b, cand.point) / 2.0
        if area < self.params.min_element_area():
            raise InvariantError("committed element below the area floor")
        if area < self.stats.min_commit_area:
            self.stats.min_commit_area = area

        cx = (front.a[0] + front.b[0] + cand.point[0]) / 3.0
        cy = (front.a[1] + front.b[1] + cand.point[1]) / 3.0
        element = Element(
            vertex_ids=(v0, v1, vid),
            owner_rank=owner_rank,
            centroid=(cx, cy),
            box=self.grid.box_of_point((cx, cy)),
        )
        self.elements.append(element)
        self.rank_element_count[owner_rank] += 1
        self.stats.commits += 1

        self._retire_front(front.creation_id)
        to_create = []
        for pair in ((v0, vid), (vid, v1)):
            existing_cid = self.front_key.get(frozenset(pair))
            if existing_cid is not None:
                existing = self.fronts[existing_cid]
                if existing.vertex_ids != (pair[1], pair[0]):
                    raise InvariantError(
                        f"front {existing.vertex_ids} matched with same orientation"
                    )
                self._retire_front(existing_cid)
            else:
                to_create.append(pair)
        if to_create:
            # Scale inheritance: mean of the parent scale and the mean scale
            # still incident at the advancing vertex (parent scale alone for
            # a fresh point).
            incident = sorted(self.incident.get(vid, ()))
            scales = [self.fronts[c].h for c in incident if c in self.fronts]
            far_h = sum(scales) / len(scales) if scales else front.h
            h_new = (front.h + far_h) / 2.0
            for pair in to_create:
                self._create_front(pair[0], pair[1], h_new)

        self.volume_remaining -= area

    # ----- merge fallback --------------------------------------------

    def _merge_fallback(self, indexed) -> None:
        """Collapse the neighborhood of the minimum-index front.

        Invoked only when no front admits any legal candidate; merging
        strictly reduces the front count, so repeated fallback terminates.
        """
        self.stats.merge_events += 1
        f_m = indexed[0]
        neighbors = self.live_tree.query_near_segment(
            f_m.a, f_m.b, self.params.gamma(f_m.h), exclude_key=f_m.creation_id
        )
        vids = set(f_m.vertex_ids)
        for nb in neighbors:
            vids.update(nb.vertex_ids)
        before = len(self.fronts)
        if not self._apply_merge(sorted(vids)):
            # Bulk merge would invert an element: collapse only the minimum
            # front's own edge instead.
            if not self._apply_merge(sorted(f_m.vertex_ids)):
                raise InvariantError("merge fallback inverted elements in both plans")
        if len(self.fronts) >= before:
            raise InvariantError("merge fallback did not reduce the front count")
        log.info(
            "merge fallback at iteration %d: fronts %d -> %d",
            self.iteration,
            before,
            len(self.fronts),
        )

    def _apply_merge(self, merge_ids) -> bool:
        """Collapse ``merge_ids`` to their centroid; False (state untouched)
        if any surviving element would invert."""
        rep = merge_ids[0]
        merged = set(merge_ids)
        sx = sy = 0.0
        for vid in merge_ids:
            sx += self.vertices[vid][0]
            sy += self.vertices[vid][1]
        centroid = (sx / len(merge_ids), sy / len(merge_ids))

        def remap(vid):
            return rep if vid in merged else vid

        def position(vid):
            return centroid if vid == rep else self.vertices[vid]

        planned = []
        for element in self.elements:
            ids = tuple(remap(v) for v in element.vertex_ids)
            if len(set(ids)) < 3:
                continue  # collapsed away
            pts = (position(ids[0]), position(ids[1]), position(ids[2]))
            if orient(*pts) <= 0.0:
                return False
            planned.append((element, ids))

        self.vertices[rep] = centroid
        threshold = 1e-9 * self.params.h_min
        affected = [
            cid
            for cid, front in sorted(self.fronts.items())
            if merged & set(front.vertex_ids)
        ]
        replacements = []
        for cid in affected:
            if cid not in self.fronts:
                continue  # annihilated below
            front = self._retire_front(cid)
            ids = (remap(front.vertex_ids[0]), remap(front.vertex_ids[1]))
            if ids[0] == ids[1]:
                continue
            if math.dist(self.vertices[ids[0]], self.vertices[ids[1]]) < threshold:
                continue
            mirror = self.front_key.get(frozenset(ids))
            if mirror is not None:
                self._retire_front(mirror)
                continue
            replacements.append((ids, front.h))
        for ids, h in replacements:
            self._create_front(ids[0], ids[1], h)

        kept = []
        for element, ids in planned:
            element.vertex_ids = ids
            ex = (position(ids[0])[0] + position(ids[1])[0] + position(ids[2])[0]) / 3.0
            ey = (position(ids[0])[1] + position(ids[1])[1] + position(ids[2])[1]) / 3.0
            element.centroid = (ex, ey)
            element.box = self.grid.box_of_point(element.centroid)
            kept.append(element)
        self.elements = kept
        self._repartition()
        return True

    # ----- invariants -------------------------------------------------

    def _check_loop_invariant(self) -> None:
        # Fronts form closed loops: every vertex carries an even number of
        # incident fronts. The count is 2 on a plain loop and 2k at a pinch
        # vertex where k sub-loops touch (a cavity split by vertex reuse).
        for vid, cids in self.incident.items():
            if len(cids) % 2 != 0:
                raise InvariantError(
                    f"vertex {vid} has {len(cids)} incident fronts (loops broken)"
                )

    # ----- driving ----------------------------------------------------

    def finish(self) -> MeshState:
        state = MeshState(
            vertices=self.vertices,
            vertex_is_boundary=self.vertex_is_boundary,
            elements=self.elements,
            fronts=self.fronts,
            iteration=self.iteration,
            volume_remaining=0.0 if not self.fronts else self.volume_remaining,
            grid=self.grid,
            stats=self.stats,
        )
        if self._own_pool:
            self.pool.close()
        return state


def generate(boundary: BoundarySpec, config: PipelineConfig, pool: RankPool | None = None) -> MeshState:
    """Run the full workflow until the front set is empty."""
    run = MeshRun(boundary, config, pool=pool)
    while run.step():
        pass
    state = run.finish()
    if config.validate and state.fronts:
        raise InvariantError("generation ended with live fronts")
    return state


def iteration_step(run: MeshRun) -> bool:
    """Spec-shaped single-superstep driver (see MeshRun.step)."""
    return run.step()
