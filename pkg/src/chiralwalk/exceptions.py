"""Exception hierarchy for chiralwalk."""


class ChiralWalkError(Exception):
    """Base class for all library errors."""


class NotHermitian(ChiralWalkError, ValueError):
    pass


class NoConvergence(ChiralWalkError, ArithmeticError):
    pass


class DomainError(ChiralWalkError, ValueError):
    """A closed-form expression is undefined at the requested argument."""


class PairNotMatched(ChiralWalkError, ValueError):
    """The requested pair of phase factors does not coincide."""


class DefectiveDecomposition(ChiralWalkError, ArithmeticError):
    """Left/right eigenvectors are not biorthogonal enough for a spectral sum."""


class DegenerateCollapse(ChiralWalkError, ArithmeticError):
    """A null outcome was drawn whose post-measurement state has zero norm."""


class InvalidSpec(ChiralWalkError, ValueError):
    """A sweep specification failed validation."""
