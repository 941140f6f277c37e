"""Element quality measurement and surface-preserving Laplacian smoothing.

Quality of a triangle is twice the ratio of inscribed to circumscribed
radius, in (0, 1] with 1 for the equilateral triangle. Smoothing is a
Jacobi iteration: every interior vertex simultaneously moves to the mean
of its neighbors' previous positions (summed in ascending vertex id), so
the result is independent of both rank count and traversal order.
Boundary vertices never move. A move is rolled back when it would invert
an incident element; a global post-sweep repair pass then guarantees no
element is inverted even by combined moves (reverting the smallest
involved vertex id first, which keeps the repair deterministic).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .errors import InvariantError
from .geometry import inradius_circumradius, orient
from .pipeline import MeshState
from .runtime import RankPool

BIN_EDGES = (0.3, 0.5, 0.7)
BIN_LABELS = ("(0,0.3)", "[0.3,0.5)", "[0.5,0.7)", "[0.7,1.0]")


def alpha(t0, t1, t2) -> float:
    """Quality indicator 2 * R_in / R_circ, clamped into (0, 1]."""
    r_in, r_circ = inradius_circumradius(t0, t1, t2)
    return min(1.0, 2.0 * r_in / r_circ)


def element_alpha(mesh: MeshState, element) -> float:
    a, b, c = element.vertex_ids
    return alpha(mesh.vertices[a], mesh.vertices[b], mesh.vertices[c])


@dataclass(frozen=True, slots=True)
class QualityReport:
    bins: tuple[int, int, int, int]
    min_alpha: float
    mean_alpha: float
    element_count: int

    def fractions(self):
        if self.element_count == 0:
            return (0.0, 0.0, 0.0, 0.0)
        return tuple(b / self.element_count for b in self.bins)


def _bin_of(a: float) -> int:
    if a < BIN_EDGES[0]:
        return 0
    if a < BIN_EDGES[1]:
        return 1
    if a < BIN_EDGES[2]:
        return 2
    return 3


def quality_report_from_alphas(alphas) -> QualityReport:
    bins = [0, 0, 0, 0]
    total = 0.0
    lo = None
    count = 0
    for a in alphas:
        bins[_bin_of(a)] += 1
        total += a
        lo = a if lo is None or a < lo else lo
        count += 1
    return QualityReport(
        bins=tuple(bins),
        min_alpha=lo if lo is not None else 0.0,
        mean_alpha=(total / count) if count else 0.0,
        element_count=count,
    )


def quality_report(mesh: MeshState) -> QualityReport:
    return quality_report_from_alphas(
        element_alpha(mesh, el) for el in mesh.elements
    )


def report_to_csv(report: QualityReport) -> str:
    lines = ["bin,count,fraction"]
    for label, count, frac in zip(BIN_LABELS, report.bins, report.fractions()):
        lines.append(f"{label},{count},{frac!r}")
    return "\n".join(lines) + "\n"


def report_to_text(report: QualityReport) -> str:
    lines = [f"elements: {report.element_count}"]
    for label, count, frac in zip(BIN_LABELS, report.bins, report.fractions()):
        lines.append(f"  alpha {label:<10} {count:>8}  ({100.0 * frac:6.2f}%)")
    lines.append(f"  min alpha  {report.min_alpha:.6f}")
    lines.append(f"  mean alpha {report.mean_alpha:.6f}")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True, slots=True)
class SmoothingConfig:
    iterations: int = 3


def vertex_adjacency(mesh: MeshState):
    """Sorted neighbor ids per vertex, derived from element edges."""
    adjacency: dict[int, set] = {}
    for el in mesh.elements:
        a, b, c = el.vertex_ids
        adjacency.setdefault(a, set()).update((b, c))
        adjacency.setdefault(b, set()).update((a, c))
        adjacency.setdefault(c, set()).update((a, b))
    return {vid: tuple(sorted(nbrs)) for vid, nbrs in adjacency.items()}


def _smooth_rank_task(payload):
    """Worker task: proposed moves for one rank's interior vertices."""
    owned, adjacency, incident, positions = payload
    out = []
    for vid, nbrs, tris in zip(owned, adjacency, incident):
        sx = sy = 0.0
        for nb in nbrs:  # ascending id: the reduction order is pinned
            px, py = positions[nb]
            sx += px
            sy += py
        n = len(nbrs)
        q = (sx / n, sy / n)
        ok = True
        for tri in tris:
            pts = tuple(q if u == vid else positions[u] for u in tri)
            if orient(*pts) <= 0.0:
                ok = False
                break
        if ok:
            out.append((vid, q))
    return out


def laplacian_smooth(
    mesh: MeshState,
    config: SmoothingConfig = SmoothingConfig(),
    n_ranks: int = 1,
    pool: RankPool | None = None,
) -> MeshState:
    """Jacobi smoothing sweeps; returns a new mesh state, boundary untouched."""
    positions = list(mesh.vertices)
    adjacency = vertex_adjacency(mesh)
    incident: dict[int, list] = {}
    for el in mesh.elements:
        for vid in el.vertex_ids:
            incident.setdefault(vid, []).append(el.vertex_ids)

    interior = [
        vid
        for vid in range(len(positions))
        if not mesh.vertex_is_boundary[vid] and vid in adjacency
    ]
    own_pool = pool is None
    pool = pool or RankPool(1)
    try:
        if interior:
            chunks = _chunks(interior, n_ranks)
            for _ in range(config.iterations):
                payloads = []
                for chunk in chunks:
                    halo_ids = set()
                    adj = []
                    tris = []
                    for vid in chunk:
                        adj.append(adjacency[vid])
                        tris.append(incident[vid])
                        halo_ids.add(vid)
                        halo_ids.update(adjacency[vid])
                        for tri in incident[vid]:
                            halo_ids.update(tri)
                    halo = {vid: positions[vid] for vid in halo_ids}
                    payloads.append((chunk, adj, tris, halo))
                results = pool.map(_smooth_rank_task, payloads)
                old_positions = positions
                positions = list(positions)
                moved = set()
                for rank_moves in results:
                    for vid, q in rank_moves:
                        positions[vid] = q
                        moved.add(vid)
                _repair_inversions(mesh, positions, old_positions, moved)
    finally:
        if own_pool:
            pool.close()
    return replace(mesh, vertices=positions)


def _chunks(items, n):
    if n <= 1:
        return [list(items)]
    size = (len(items) + n - 1) // n
    return [list(items[i : i + size]) for i in range(0, len(items), size)] or [[]]


def _repair_inversions(mesh, positions, old_positions, moved):
    """Revert combined moves that inverted an element, smallest vertex first."""
    while True:
        bad_vid = None
        for el in mesh.elements:
            a, b, c = el.vertex_ids
            if orient(positions[a], positions[b], positions[c]) <= 0.0:
                movers = sorted(v for v in (a, b, c) if v in moved)
                if not movers:
                    raise InvariantError(
                        f"element {el.vertex_ids} inverted without a moved vertex"
                    )
                bad_vid = movers[0]
                break
        if bad_vid is None:
            return
        positions[bad_vid] = old_positions[bad_vid]
        moved.discard(bad_vid)
