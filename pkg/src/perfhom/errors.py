"""Exception types shared across the package."""


class GeometryError(ValueError):
    """Invalid geometric input (bad radii, empty domain, ...)."""


class PackingInfeasibleError(GeometryError):
    """Requested cavity count exceeds what the guard-ball packing admits."""


class MeshingError(RuntimeError):
    """Mesh construction failed or would violate a mesh invariant."""


class TransferError(ValueError):
    """A target vertex could not be located in the source triangulation."""


class SolverError(RuntimeError):
    """Linear or nonlinear solve failed."""


class PicardDivergenceError(SolverError):
    """Successive-substitution iteration stopped contracting."""


class EigenSolverError(RuntimeError):
    """Power iteration on a generalized eigenvalue pencil did not converge."""


class UnsupportedScalingError(ValueError):
    """Operation requires a power-law scaling (eta = eps^gamma, mu = eps^delta)."""
