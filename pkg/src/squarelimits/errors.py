"""Exception hierarchy shared by every module."""


class SquareLimitsError(Exception):
    """Base class for all package errors."""


class InvalidInputError(SquareLimitsError, ValueError):
    pass


class DomainError(SquareLimitsError, ValueError):
    pass


class InvalidSpecError(SquareLimitsError, ValueError):
    pass


class MarginError(InvalidSpecError):
    pass


class NotInvertibleError(SquareLimitsError):
    def __init__(self, node, message=None):
        self.node = node
        super().__init__(message or f"map node {node!r} is not invertible here")


class NearSingularError(SquareLimitsError):
    """Inverse requested too close to the exceptional set of a permeating."""


class ResolutionError(SquareLimitsError):
    def __init__(self, message, suggested_mesh_h=None):
        self.suggested_mesh_h = suggested_mesh_h
        super().__init__(message)


class UnsupportedStructureError(SquareLimitsError):
    pass


class PlacementError(SquareLimitsError):
    pass


class InvalidFamilyError(SquareLimitsError):
    def __init__(self, pair, message=None):
        self.pair = pair
        super().__init__(message or f"hutches {pair[0]} and {pair[1]} overlap")


class EnumerationDepthError(SquareLimitsError):
    pass


class DegeneracyError(SquareLimitsError):
    pass


class InternalConsistencyError(SquareLimitsError):
    pass


class StepError(SquareLimitsError):
    """Evaluation failure inside an orbit, tagged with the step index."""

    def __init__(self, step, cause):
        self.step = step
        self.cause = cause
        super().__init__(f"orbit evaluation failed at step {step}: {cause}")


class StageError(SquareLimitsError):
    def __init__(self, stage, cause, partial=None):
        self.stage = stage
        self.cause = cause
        self.partial = partial or {}
        super().__init__(f"pipeline stage '{stage}' failed: {cause}")
