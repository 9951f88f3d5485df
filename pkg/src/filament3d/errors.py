"""Exception hierarchy used throughout the package."""


class Filament3DError(Exception):
    """Base class for every error raised by filament3d."""


class InvalidInput(Filament3DError, ValueError):
    pass


class TooLarge(InvalidInput):
    """Input exceeds the size bound of a brute-force oracle."""


class WrongTopology(Filament3DError):
    pass


class UnsupportedTopology(Filament3DError):
    pass


class AmbiguousDirection(Filament3DError):
    """The two candidate loop directions turn by (nearly) the same angle."""


class DegenerateLineFit(Filament3DError):
    pass


class ProjectionDegenerate(Filament3DError):
    pass


class TriangulationDegenerate(Filament3DError):
    pass


class FrustumViolation(ProjectionDegenerate):
    pass


class NumericalFailure(Filament3DError):
    pass


class DegenerateRegistration(Filament3DError):
    pass


class DegenerateMetric(Filament3DError):
    pass


class PipelineStageError(Filament3DError):
    """Wraps an error raised inside a named pipeline stage."""

    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")
