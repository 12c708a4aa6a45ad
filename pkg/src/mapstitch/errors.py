"""Exception types shared across the package."""


class MapstitchError(Exception):
    """Base class for all package errors."""


class InvalidConfig(MapstitchError):
    """A scenario or session configuration field is invalid."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class DegenerateConfiguration(MapstitchError):
    """Too few or rank-deficient correspondences for a similarity fit."""


class DegenerateRay(MapstitchError):
    """An intersection angle was requested for coincident points."""


class ZeroIntersectionAngle(MapstitchError):
    """Depth error is undefined for a zero or 180-degree intersection angle."""


class ParallelRays(MapstitchError):
    """Triangulation rays are parallel (below the angle floor)."""


class EmptyFrame(MapstitchError):
    """An operation needs a frame with at least one observation/word."""


class InsufficientHistory(MapstitchError):
    """The current map lacks the frames needed for threshold selection."""


class ZeroBaseline(MapstitchError):
    """The query frame shares no words/score with its predecessor."""


class NoValidPairs(MapstitchError):
    """No connected-frame pair meets the minimum shared-point count."""


class OutOfRangeTheta(MapstitchError):
    """Median intersection angle outside the [0, 45] degree contract."""


class ResidualTooLarge(MapstitchError):
    """Merge transform residual exceeds the configured cap."""


class OutOfOrderFrame(MapstitchError):
    """Frames must be supplied in acquisition order."""


class ScenarioMismatch(MapstitchError):
    """Two run reports do not come from the same scenario and seed."""
