"""Exception types shared across the package.

The command line tool maps these onto process exit codes: bad input is 1,
numeric trouble (degeneracy, lost convergence, leaving the computational
domain, approaching a patch apex) is 2, and a violated safety guarantee is 3.
"""


class SkinMeshError(Exception):
    """Base class for all package errors."""


class InputError(SkinMeshError):
    """Malformed user input: files, parameters, or unusable configurations."""


class NumericError(SkinMeshError):
    """Numeric failure while evaluating geometry."""


class DegeneracyError(NumericError):
    """Input spheres admit a degenerate predicate (exact tie).

    Raised instead of perturbing the input.  The offending simplex is kept
    on the exception for diagnosis.
    """

    def __init__(self, message, simplex=None):
        super().__init__(message)
        self.simplex = tuple(simplex) if simplex is not None else None


class SingularityError(NumericError):
    """A point reached or started too close to a quadric apex."""


class ConvergenceError(NumericError):
    """An iterative solve exhausted its budget without converging."""


class DomainError(NumericError):
    """A query point or trajectory left the region covered by the complex."""


class SafetyViolationError(SkinMeshError):
    """An element was observed in the forbidden size range.

    The scheduler promises early warning: every element is rechecked before
    it can become unacceptable.  Seeing an unacceptable element therefore
    means the guarantee failed and the run must stop.
    """
