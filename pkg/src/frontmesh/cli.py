"""Command-line surface: mesh, check-consistency, quality, bench.

Exit codes: 0 success, 1 usage error, 2 input validation error,
3 consistency mismatch, 4 internal invariant violation.
"""

from __future__ import annotations

import argparse
import sys
import time

from .advancer import AdvanceParams
from .boundary import load_boundary
from .errors import BoundaryError, ConsistencyError, FrontmeshError, GeometryError
from .meshio import canonical_hash, export_mesh, manifest_entries, read_vtk, write_manifest
from .pipeline import PipelineConfig, generate
from .quality import (
    SmoothingConfig,
    alpha,
    laplacian_smooth,
    quality_report,
    quality_report_from_alphas,
    report_to_text,
)
from .runtime import RankPool

USAGE_EXIT = 1
INPUT_EXIT = 2
MISMATCH_EXIT = 3
INVARIANT_EXIT = 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(USAGE_EXIT)


def _int_list(text):
    try:
        values = [int(v) for v in text.split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated int list: {text!r}")
    if not values or any(v < 1 for v in values):
        raise argparse.ArgumentTypeError(f"need positive entries: {text!r}")
    return values


def _sfc_level(text):
    if text == "auto":
        return None
    try:
        return int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"--sfc-level takes an integer or 'auto', got {text!r}")


def build_parser() -> _Parser:
    parser = _Parser(prog="frontmesh", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    mesh = sub.add_parser("mesh", help="generate a mesh from a boundary file")
    mesh.add_argument("--input", required=True)
    mesh.add_argument("--output", required=True)
    mesh.add_argument("--format", choices=("vtk", "obj"), default="vtk")
    mesh.add_argument("--np", type=int, default=1)
    mesh.add_argument("--sfc-level", type=_sfc_level, default=None)
    mesh.add_argument("--beta1", type=float, default=0.40)
    mesh.add_argument("--beta2", type=float, default=0.15)
    mesh.add_argument("--eta", type=float, default=0.15)
    mesh.add_argument("--h-min", type=float, default=None)
    mesh.add_argument("--h-max", type=float, default=None)
    mesh.add_argument("--smooth-iters", type=int, default=3)
    mesh.add_argument("--manifest", default=None)

    check = sub.add_parser("check-consistency", help="hash-compare runs across rank counts")
    check.add_argument("--input", required=True)
    check.add_argument("--np-list", type=_int_list, default=[1, 2, 4, 8])

    qual = sub.add_parser("quality", help="quality histogram of an exported mesh")
    qual.add_argument("--input", required=True)

    bench = sub.add_parser("bench", help="wall-clock scaling over worker counts")
    bench.add_argument("--input", required=True)
    bench.add_argument("--threads-list", type=_int_list, default=[1, 2, 4])
    bench.add_argument("--np", type=int, default=None)
    return parser


def _pipeline_pieces(args, n_ranks, workers=1, sfc_level=None):
    try:
        params_probe = AdvanceParams(
            h_min=1.0, h_max=1.0, beta1=args.beta1, beta2=args.beta2, eta=args.eta
        )
    except ValueError as exc:
        # Flag combinations that violate the parameter invariants are usage
        # errors, same class as an unknown flag.
        print(f"frontmesh: error: {exc}", file=sys.stderr)
        raise SystemExit(USAGE_EXIT)
    del params_probe
    boundary = load_boundary(args.input, h_min=args.h_min, h_max=args.h_max)
    for warning in boundary.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    params = AdvanceParams(
        h_min=boundary.h_min,
        h_max=boundary.h_max,
        beta1=args.beta1,
        beta2=args.beta2,
        eta=args.eta,
    )
    config = PipelineConfig(
        params=params, n_ranks=n_ranks, workers=workers, sfc_level=sfc_level
    )
    return boundary, config


def _run_mesh(args) -> int:
    if args.smooth_iters < 0:
        raise BoundaryError("--smooth-iters must be non-negative")
    boundary, config = _pipeline_pieces(args, args.np, sfc_level=args.sfc_level)
    mesh = generate(boundary, config)
    hash_raw = canonical_hash(mesh)
    smoothed = mesh
    if args.smooth_iters > 0:
        smoothed = laplacian_smooth(
            mesh, SmoothingConfig(iterations=args.smooth_iters), n_ranks=config.n_ranks
        )
    hash_smoothed = canonical_hash(smoothed)
    export_mesh(smoothed, args.output, args.format)
    if args.manifest:
        write_manifest(
            args.manifest,
            manifest_entries(args.input, config, mesh, hash_raw, hash_smoothed, args.smooth_iters),
        )
    report = quality_report(smoothed)
    print(
        f"meshed {args.input}: {len(smoothed.elements)} elements, "
        f"{len(smoothed.vertices)} vertices, {mesh.stats.iterations} iterations"
    )
    print(report_to_text(report), end="")
    print(f"hash {hash_smoothed}")
    return 0


def run_consistency_check(boundary_path, np_list, beta1=0.40, beta2=0.15, eta=0.15,
                          h_min=None, h_max=None, smooth_iterations=3):
    """Run the pipeline per rank count; returns (hashes, reference hash)."""
    hashes = []
    for n_ranks in np_list:
        boundary = load_boundary(boundary_path, h_min=h_min, h_max=h_max)
        params = AdvanceParams(
            h_min=boundary.h_min, h_max=boundary.h_max, beta1=beta1, beta2=beta2, eta=eta
        )
        config = PipelineConfig(params=params, n_ranks=n_ranks)
        mesh = generate(boundary, config)
        smoothed = laplacian_smooth(
            mesh, SmoothingConfig(iterations=smooth_iterations), n_ranks=n_ranks
        )
        hashes.append((n_ranks, canonical_hash(mesh), canonical_hash(smoothed)))
    return hashes


def _run_check(args) -> int:
    hashes = run_consistency_check(args.input, args.np_list)
    for n_ranks, raw, smoothed in hashes:
        print(f"np={n_ranks} raw={raw} smoothed={smoothed}")
    raws = {raw for _, raw, _ in hashes}
    smootheds = {s for _, _, s in hashes}
    if len(raws) != 1 or len(smootheds) != 1:
        raise ConsistencyError("mesh hashes differ across rank counts")
    print("consistent")
    return 0


def _run_quality(args) -> int:
    points, triangles, _ = read_vtk(args.input)
    alphas = [alpha(points[a], points[b], points[c]) for a, b, c in triangles]
    print(report_to_text(quality_report_from_alphas(alphas)), end="")
    return 0


def _run_bench(args) -> int:
    n_ranks = args.np if args.np is not None else max(args.threads_list)
    rows = []
    for workers in args.threads_list:
        boundary, config = _pipeline_pieces(
            _BenchArgs(args.input), n_ranks, workers=workers
        )
        pool = RankPool(workers)
        try:
            start = time.perf_counter()
            mesh = generate(boundary, config, pool=pool)
            elapsed = time.perf_counter() - start
        finally:
            pool.close()
        rows.append((workers, elapsed, len(mesh.elements), canonical_hash(mesh)))
    print(f"{'workers':>8} {'time_s':>10} {'elements':>10} {'rate_el_s':>12} {'speedup':>8}")
    base = rows[0][1]
    for workers, elapsed, n_el, _ in rows:
        rate = n_el / elapsed if elapsed > 0 else float("inf")
        print(f"{workers:>8} {elapsed:>10.3f} {n_el:>10} {rate:>12.1f} {base / elapsed:>8.2f}")
    hashes = {h for _, _, _, h in rows}
    if len(hashes) != 1:
        raise ConsistencyError("bench runs produced different meshes")
    print(f"hash {rows[0][3]}")
    return 0


class _BenchArgs:
    """Minimal argument view for _pipeline_pieces."""

    def __init__(self, input_path):
        self.input = input_path
        self.h_min = None
        self.h_max = None
        self.beta1 = 0.40
        self.beta2 = 0.15
        self.eta = 0.15


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "mesh":
            return _run_mesh(args)
        if args.command == "check-consistency":
            return _run_check(args)
        if args.command == "quality":
            return _run_quality(args)
        if args.command == "bench":
            return _run_bench(args)
        parser.error(f"unknown command {args.command!r}")
    except SystemExit as exc:
        return exc.code or 0
    except (BoundaryError, GeometryError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return INPUT_EXIT
    except ConsistencyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return MISMATCH_EXIT
    except FrontmeshError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return INVARIANT_EXIT
    return 0


if __name__ == "__main__":
    sys.exit(main())
