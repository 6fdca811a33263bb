"""Exception types shared across the package."""


class BlockAdmmError(Exception):
    """Base class for package-specific failures."""


class ShapeError(BlockAdmmError, ValueError):
    """Operand dimensions are inconsistent."""


class DegenerateOperatorError(BlockAdmmError, ValueError):
    """A linear map is identically zero where a nonzero one is required."""


class MetadataIncompleteError(BlockAdmmError, ValueError):
    """An operation needs instance metadata that is absent."""


class OutOfDomainError(BlockAdmmError, ValueError):
    """A point lies outside the domain of a nonsmooth term."""


class InvalidCertificateError(BlockAdmmError, ValueError):
    """A certificate violates a structural requirement (e.g. negative slack)."""


class NotStronglyConvexError(BlockAdmmError, ValueError):
    """A subproblem lacks the positive curvature the solver requires."""


class NonconvergenceError(BlockAdmmError, RuntimeError):
    """An iterative solve hit its iteration cap.

    The partially completed result, when available, is attached as
    ``result`` so callers can inspect the trace.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class StepsizeCollapseError(BlockAdmmError, RuntimeError):
    """Stepsize halving exceeded its cap.

    Halving a prox stepsize more than the cap means the descent test can
    never be satisfied, which indicates an inconsistent objective oracle
    rather than genuine nonconvexity.
    """

    def __init__(self, message, block=None):
        super().__init__(message)
        self.block = block
