"""Exception hierarchy shared by all circsense modules."""


class CircsenseError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(CircsenseError, ValueError):
    """Operand shapes do not agree."""


class ParameterError(CircsenseError, ValueError):
    """A scalar or structural parameter is outside its valid range."""


class SingularityError(CircsenseError, ArithmeticError):
    """An operator that must be inverted is (numerically) singular."""


class ConsistencyError(CircsenseError, ArithmeticError):
    """An internal numerical consistency check failed."""


class DivergenceError(CircsenseError, ArithmeticError):
    """A solver produced a non-finite iterate."""


class DenseCapError(CircsenseError):
    """Refusal to build an O(n^2) dense object above the configured cap."""


class PhaseError(CircsenseError):
    """A kernel phase failed; ``global_id`` names the offending work item."""

    def __init__(self, message, global_id=None):
        super().__init__(message)
        self.global_id = global_id


class FormatError(CircsenseError, ValueError):
    """A file on disk does not follow the expected format."""
