"""Deterministic parallel-consistent advancing-front triangular mesher."""

from .advancer import AdvanceParams, Candidate, propose
from .boundary import BoundarySpec, load_boundary
from .errors import (
    BoundaryError,
    ConsistencyError,
    FrontmeshError,
    GeometryError,
    InvariantError,
    OverlapError,
)
from .meshio import canonical_hash, export_mesh
from .pipeline import MeshRun, MeshState, PipelineConfig, generate, termination_bound
from .quality import QualityReport, SmoothingConfig, alpha, laplacian_smooth, quality_report

__version__ = "0.1.0"

__all__ = [
    "AdvanceParams",
    "BoundaryError",
    "BoundarySpec",
    "Candidate",
    "ConsistencyError",
    "FrontmeshError",
    "GeometryError",
    "InvariantError",
    "MeshRun",
    "MeshState",
    "OverlapError",
    "PipelineConfig",
    "QualityReport",
    "SmoothingConfig",
    "alpha",
    "canonical_hash",
    "export_mesh",
    "generate",
    "laplacian_smooth",
    "load_boundary",
    "propose",
    "quality_report",
    "termination_bound",
]
