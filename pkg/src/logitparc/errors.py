"""Exception hierarchy.

Every error carries the process exit code the command line front end uses
when it reports it.
"""

EXIT_PARAMETER = 2
EXIT_IO = 3
EXIT_FORMAT = 4
EXIT_CONSTRAINT = 5


class ParcellationError(Exception):
    exit_code = 1


class ParameterError(ParcellationError, ValueError):
    exit_code = EXIT_PARAMETER


class DimensionError(ParameterError):
    pass


class CorrespondenceError(ParameterError):
    """Inputs that should describe the same seeds disagree in shape."""


class EmptyDomainError(ParameterError):
    pass


class EmptyCohortError(ParameterError):
    pass


class SpaceMismatchError(ParameterError):
    """A matrix is in probability space where logit space is expected, or vice versa."""


class InvalidTrialsError(ParameterError):
    pass


class MeshError(ParcellationError, ValueError):
    """Structurally invalid triangulation."""

    exit_code = EXIT_FORMAT


class FormatError(ParcellationError, ValueError):
    exit_code = EXIT_FORMAT


class ConstraintError(ParcellationError):
    """A spatial constraint cannot be satisfied on the given graph."""

    exit_code = EXIT_CONSTRAINT


class DisconnectedGraphError(ConstraintError):
    pass
