"""Conflict graph over candidates and the consistent parallel MIS.

Two candidates conflict when their advancing points are closer than the
sum of their local scales; a maximal independent set of the conflict
graph is the largest batch of advancements that can commit together.

The parallel algorithm runs in supersteps. Each rank selects the pending
vertices that are local minima of the id order over their pending
neighborhood, promotes them, demotes their pending neighbors, and then
exchanges state deltas; every rank applies the deltas in (source rank,
id) order. Because ids are the decomposition-invariant global indices
and every rank sees the full pending neighborhood of its owned vertices
(overlap completeness), the accepted set is identical for every rank
count; the uncapped run equals the sequential deterministic heuristic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import InvariantError, OverlapError

_PENDING = 0
_ACCEPTED = 1
_DISCARDED = 2


@dataclass(frozen=True, slots=True)
class ConflictGraph:
    """Symmetric, irreflexive adjacency over candidate ids."""

    ids: tuple[int, ...]
    adjacency: dict[int, tuple[int, ...]]

    def neighbors(self, vid: int) -> tuple[int, ...]:
        return self.adjacency[vid]


def build_conflict_graph(candidates) -> ConflictGraph:
    """Graph over (id, point, h) triples: edge iff dist(p_i, p_j) < h_i + h_j.

    Built with a uniform spatial hash so only nearby pairs are tested;
    the predicate itself is evaluated on exact squared distances.
    """
    items = []
    seen = set()
    max_h = 0.0
    for cid, point, h in candidates:
        if cid in seen:
            raise InvariantError(f"duplicate candidate id {cid}")
        seen.add(cid)
        items.append((cid, point[0], point[1], h))
        if h > max_h:
            max_h = h

    adjacency: dict[int, list[int]] = {cid: [] for cid, _, _, _ in items}
    if len(items) > 1:
        cell = 2.0 * max_h
        buckets: dict[tuple[int, int], list[tuple[int, float, float, float]]] = {}
        for item in items:
            key = (int(item[1] // cell), int(item[2] // cell))
            buckets.setdefault(key, []).append(item)
        for (bx, by), bucket in buckets.items():
            for nx in (bx - 1, bx, bx + 1):
                for ny in (by - 1, by, by + 1):
                    other = buckets.get((nx, ny))
                    if other is None:
                        continue
                    for cid, x, y, h in bucket:
                        for cjd, xj, yj, hj in other:
                            if cjd <= cid:
                                continue
                            dx = x - xj
                            dy = y - yj
                            reach = h + hj
                            if dx * dx + dy * dy < reach * reach:
                                adjacency[cid].append(cjd)
                                adjacency[cjd].append(cid)

    ids = tuple(sorted(adjacency))
    return ConflictGraph(
        ids=ids,
        adjacency={cid: tuple(sorted(set(nbrs))) for cid, nbrs in adjacency.items()},
    )


@dataclass(slots=True)
class MisResult:
    accepted: tuple[int, ...]
    discarded: tuple[int, ...]
    pending: tuple[int, ...]
    accepted_by_rank: list[tuple[int, ...]]
    rounds: int


def _check_universe(graph: ConflictGraph, owned_by_rank, universes) -> None:
    for rank, owned in enumerate(owned_by_rank):
        universe = universes[rank]
        for vid in owned:
            for nbr in graph.neighbors(vid):
                if nbr not in universe:
                    raise OverlapError(
                        f"rank {rank}: neighbor {nbr} of owned vertex {vid} "
                        "missing from the ghost universe (delta too small)"
                    )


def cpmis_run(
    graph: ConflictGraph,
    owner_of,
    n_ranks: int,
    max_rounds: int | None = None,
    rank_universes=None,
) -> MisResult:
    """Run the consistent parallel MIS over a partition of the vertex ids.

    ``owner_of`` maps vertex id -> rank. When ``max_rounds`` is None the
    algorithm runs until the pending set empties, which yields a maximal
    independent set; a cap may leave vertices pending (they simply retry
    in the next pipeline iteration). ``rank_universes`` optionally gives
    each rank's locally visible vertex set so overlap completeness can be
    verified; by construction each rank must see N(v) for every owned v.
    """
    owned_by_rank: list[list[int]] = [[] for _ in range(n_ranks)]
    for vid in graph.ids:
        rank = owner_of[vid] if not callable(owner_of) else owner_of(vid)
        if not (0 <= rank < n_ranks):
            raise ValueError(f"vertex {vid} assigned to invalid rank {rank}")
        owned_by_rank[rank].append(vid)
    for owned in owned_by_rank:
        owned.sort()

    if rank_universes is None:
        rank_universes = []
        for owned in owned_by_rank:
            universe = set(owned)
            for vid in owned:
                universe.update(graph.neighbors(vid))
            rank_universes.append(universe)
    _check_universe(graph, owned_by_rank, rank_universes)

    state = {vid: _PENDING for vid in graph.ids}
    rounds = 0
    while any(state[vid] == _PENDING for vid in graph.ids):
        if max_rounds is not None and rounds >= max_rounds:
            break
        # Compute phase: every rank reads the superstep-start state and
        # buffers deltas; nothing is applied until the exchange.
        deltas: list[tuple[int, int, int]] = []  # (source rank, id, new state)
        for rank in range(n_ranks):
            for vid in owned_by_rank[rank]:
                if state[vid] != _PENDING:
                    continue
                nbrs = graph.neighbors(vid)
                if all(state[n] != _PENDING or vid <= n for n in nbrs):
                    deltas.append((rank, vid, _ACCEPTED))
                    for n in nbrs:
                        if state[n] == _PENDING:
                            deltas.append((rank, n, _DISCARDED))
                        elif state[n] == _ACCEPTED:
                            raise InvariantError(
                                "accepted vertex adjacent to a new selection"
                            )
        # Exchange phase: apply in (source rank, id) order. Accept/discard
        # deltas can never target the same vertex (the smaller id wins the
        # selection test), which we assert rather than assume.
        decided: dict[int, int] = {}
        for _, vid, new_state in sorted(deltas):
            if decided.setdefault(vid, new_state) != new_state:
                raise InvariantError(f"conflicting state deltas for vertex {vid}")
            state[vid] = new_state
        rounds += 1
        if not deltas:
            raise InvariantError("MIS made no progress on a nonempty pending set")

    accepted = tuple(v for v in graph.ids if state[v] == _ACCEPTED)
    accepted_set = set(accepted)
    for vid in accepted:
        for nbr in graph.neighbors(vid):
            if nbr in accepted_set:
                raise InvariantError("accepted set is not independent")
    return MisResult(
        accepted=accepted,
        discarded=tuple(v for v in graph.ids if state[v] == _DISCARDED),
        pending=tuple(v for v in graph.ids if state[v] == _PENDING),
        accepted_by_rank=[
            tuple(v for v in owned if state[v] == _ACCEPTED) for owned in owned_by_rank
        ],
        rounds=rounds,
    )


def sequential_mis_oracle(graph: ConflictGraph) -> tuple[int, ...]:
    """Single-rank, uncapped run: the deterministic heuristic baseline."""
    if not graph.ids:
        return ()
    owner = {vid: 0 for vid in graph.ids}
    return cpmis_run(graph, owner, 1, max_rounds=None).accepted
