"""Mesh export, import, canonical hashing, and run manifests.

Exports are deterministic text: floats are written with ``repr``, the
shortest representation that round-trips to the same double, so a mesh
exported twice yields byte-identical files and the internal reader
reproduces exact coordinates.

The canonical hash covers the mesh content only: vertex ids with exact
coordinate bit patterns and element connectivity triples rotated so the
smallest id leads (orientation preserved) and sorted. Rank ownership and
element commit order are presentation details and are excluded, so the
digest is invariant under rank relabeling and repartitioning.
"""

from __future__ import annotations

import hashlib
import struct

from .errors import BoundaryError, FrontmeshError
from .quality import element_alpha

EXPORT_FORMATS = ("vtk", "obj")


def canonical_element(triple) -> tuple[int, int, int]:
    """Rotate the triple so the smallest vertex id leads; orientation kept."""
    a, b, c = triple
    if a <= b and a <= c:
        return (a, b, c)
    if b <= a and b <= c:
        return (b, c, a)
    return (c, a, b)


def canonical_hash(mesh) -> str:
    """256-bit content digest of the canonical mesh serialization."""
    digest = hashlib.sha256()
    digest.update(struct.pack("<Q", len(mesh.vertices)))
    for vid, (x, y) in enumerate(mesh.vertices):
        digest.update(struct.pack("<Qdd", vid, x, y))
    triples = sorted(canonical_element(el.vertex_ids) for el in mesh.elements)
    digest.update(struct.pack("<Q", len(triples)))
    for triple in triples:
        digest.update(struct.pack("<QQQ", *triple))
    return digest.hexdigest()


def _export_order(mesh):
    """Elements in ascending (owner rank, creation order)."""
    return sorted(range(len(mesh.elements)), key=lambda i: (mesh.elements[i].owner_rank, i))


def write_vtk(mesh, path) -> None:
    lines = [
        "# vtk DataFile Version 3.0",
        "frontmesh triangulation",
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {len(mesh.vertices)} double",
    ]
    for x, y in mesh.vertices:
        lines.append(f"{x!r} {y!r} 0.0")
    order = _export_order(mesh)
    lines.append(f"CELLS {len(order)} {4 * len(order)}")
    for i in order:
        a, b, c = mesh.elements[i].vertex_ids
        lines.append(f"3 {a} {b} {c}")
    lines.append(f"CELL_TYPES {len(order)}")
    lines.extend("5" for _ in order)
    lines.append(f"CELL_DATA {len(order)}")
    lines.append("SCALARS alpha double 1")
    lines.append("LOOKUP_TABLE default")
    for i in order:
        lines.append(repr(element_alpha(mesh, mesh.elements[i])))
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def write_obj(mesh, path) -> None:
    lines = []
    for x, y in mesh.vertices:
        lines.append(f"v {x!r} {y!r} 0.0")
    for i in _export_order(mesh):
        a, b, c = mesh.elements[i].vertex_ids
        lines.append(f"f {a + 1} {b + 1} {c + 1}")
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def export_mesh(mesh, path, fmt: str) -> None:
    if mesh.fronts:
        raise FrontmeshError("cannot export an incomplete mesh (live fronts remain)")
    if fmt == "vtk":
        write_vtk(mesh, path)
    elif fmt == "obj":
        write_obj(mesh, path)
    else:
        raise ValueError(f"unknown export format {fmt!r}; use one of {EXPORT_FORMATS}")


def read_vtk(path):
    """Parse a legacy ASCII VTK triangle mesh (the writer's dialect).

    Returns (points, triangles, alphas) where alphas may be None.
    """
    with open(path, "r", encoding="ascii") as fh:
        tokens = fh.read().split()
    pos = 0

    def expect(word):
        nonlocal pos
        if pos >= len(tokens) or tokens[pos].upper() != word:
            raise BoundaryError(f"VTK parse error: expected {word} near token {pos}")
        pos += 1

    def find(word):
        nonlocal pos
        while pos < len(tokens) and tokens[pos].upper() != word:
            pos += 1
        if pos >= len(tokens):
            return False
        pos += 1
        return True

    if not find("DATASET"):
        raise BoundaryError("VTK parse error: no DATASET record")
    expect("UNSTRUCTURED_GRID")
    if not find("POINTS"):
        raise BoundaryError("VTK parse error: no POINTS record")
    n_points = int(tokens[pos]); pos += 2  # skip dtype
    points = []
    for _ in range(n_points):
        x = float(tokens[pos]); y = float(tokens[pos + 1]); pos += 3  # skip z
        points.append((x, y))
    if not find("CELLS"):
        raise BoundaryError("VTK parse error: no CELLS record")
    n_cells = int(tokens[pos]); pos += 2  # skip size
    triangles = []
    for _ in range(n_cells):
        arity = int(tokens[pos]); pos += 1
        if arity != 3:
            raise BoundaryError("VTK parse error: non-triangle cell")
        triangles.append((int(tokens[pos]), int(tokens[pos + 1]), int(tokens[pos + 2])))
        pos += 3
    alphas = None
    mark = pos
    if find("SCALARS") and tokens[pos] == "alpha":
        pos += 2  # name, dtype
        if tokens[pos] == "1":
            pos += 1
        expect("LOOKUP_TABLE")
        pos += 1  # table name
        alphas = [float(tokens[pos + i]) for i in range(n_cells)]
    else:
        pos = mark
    return points, triangles, alphas


def write_manifest(path, entries) -> None:
    """Run manifest: deterministic key=value lines in insertion order."""
    with open(path, "w", encoding="utf-8") as fh:
        for key, value in entries.items():
            fh.write(f"{key}={value}\n")


def manifest_entries(boundary_path, config, mesh, hash_raw, hash_smoothed, smooth_iterations):
    params = config.params
    return {
        "input": boundary_path,
        "n_ranks": config.n_ranks,
        "workers": config.workers,
        "sfc_level": mesh.stats.sfc_level,
        "beta1": params.beta1,
        "beta2": params.beta2,
        "eta": params.eta,
        "epsilon": params.epsilon,
        "h_min": params.h_min,
        "h_max": params.h_max,
        "smooth_iterations": smooth_iterations,
        "iterations": mesh.stats.iterations,
        "termination_bound": mesh.stats.termination_bound,
        "merge_events": mesh.stats.merge_events,
        "repartitions": mesh.stats.repartitions,
        "vertices": len(mesh.vertices),
        "elements": len(mesh.elements),
        "mesh_hash_raw": hash_raw,
        "mesh_hash_smoothed": hash_smoothed,
    }
