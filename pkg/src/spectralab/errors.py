"""Exception types shared across the package."""


class SpectralabError(Exception):
    """Base class for all package errors."""


class MeshValidationError(SpectralabError):
    """Mesh data violates a structural requirement (closedness,
    orientation, connectivity, degenerate faces, bad indices)."""


class IllConditionedInputError(SpectralabError):
    """Input is formally valid but numerically hopeless (near-zero
    lattice angle, density below floor, absurd aspect ratios)."""


class ResourceLimitError(SpectralabError):
    """Requested size exceeds the documented desk-scale caps."""


class SolverConvergenceError(SpectralabError):
    """Eigensolver failed to reach the requested residual tolerance
    within its iteration budget."""

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals


class MultiplicityError(SpectralabError):
    """An operation that needs a simple eigenvalue hit a cluster."""

    def __init__(self, message, cluster=None):
        super().__init__(message)
        self.cluster = cluster


class SurgeryError(SpectralabError):
    """A gluing or handle construction could not be carried out on the
    given mesh (rim not a disk boundary, overlapping caps, guards)."""
