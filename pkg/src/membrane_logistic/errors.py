"""Exception hierarchy for the membrane-logistic solvers."""


class MembraneError(Exception):
    """Base class for all library errors."""


class InvalidGeometry(MembraneError):
    """Domain description is degenerate or inconsistent."""


class TooCoarse(MembraneError):
    """Mesh resolution is too low for the requested construction."""


class RefugeTouchesBoundary(MembraneError):
    """A refuge region reaches the interface or outer boundary."""


class EmptyRefuge(MembraneError):
    """No refuge nodes are tagged for the requested subdomain."""


class NegativePermeability(MembraneError):
    """Membrane permeability must be non-negative."""


class DimensionMismatch(MembraneError):
    """Operator or vector dimensions are inconsistent."""


class SingularOperator(MembraneError):
    """Sparse factorization failed or produced a negligible pivot."""

    def __init__(self, message, smallest_pivot=None):
        super().__init__(message)
        self.smallest_pivot = smallest_pivot


class NegativeWeight(MembraneError):
    """Weight mass matrix has a non-positive diagonal entry."""


class NoConvergence(MembraneError):
    """An iterative solver exhausted its iteration budget."""

    def __init__(self, message, iterations=None, residual=None):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


class BracketFailure(MembraneError):
    """No sign change found when bracketing a root."""


class ShiftTooSmall(MembraneError):
    """Shifted operator is not positive definite."""


class WindowViolation(MembraneError):
    """Parameter lies outside the admissible existence window."""


class PatchFailure(MembraneError):
    """No refuge neighbourhood admits a positive patched supersolution."""


class NotContracting(MembraneError):
    """A monotone iterate escaped its sub/supersolution bracket."""


class MaxIters(MembraneError):
    """Iteration budget exhausted before reaching tolerance."""


class SingularJacobian(MembraneError):
    """Newton linearization is numerically singular."""


class NotStagnating(MembraneError):
    """Boundary-data ramp did not stagnate on the evaluation compact."""


class SchemaError(MembraneError):
    """Configuration document violates the documented schema."""


class InvariantError(MembraneError):
    """A model invariant (coefficient sign, monotonicity, ...) is violated."""
