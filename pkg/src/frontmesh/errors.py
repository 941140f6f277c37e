"""Exception hierarchy shared by all frontmesh modules."""


class FrontmeshError(Exception):
    """Base class for all errors raised by this package."""


class GeometryError(FrontmeshError):
    """Degenerate or corrupted geometric input (zero-length front, collinear element)."""


class BoundaryError(FrontmeshError):
    """Invalid boundary description (open loop, bad orientation, self-intersection)."""

    def __init__(self, message, loop_index=None, edge_index=None):
        super().__init__(message)
        self.loop_index = loop_index
        self.edge_index = edge_index


class OverlapError(FrontmeshError):
    """A rank's ghost layer is missing data the algorithm needs; delta was mis-sized."""


class InvariantError(FrontmeshError):
    """An internal consistency invariant was violated; the run state is untrustworthy."""


class ConsistencyError(FrontmeshError):
    """Runs that must produce identical meshes produced different ones."""
