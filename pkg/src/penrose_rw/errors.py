"""Exception types raised across the package."""


class PenroseError(Exception):
    """Base class for all package errors."""


class SingularGrid(PenroseError):
    """Three or more pentagrid lines meet in a point."""


class OnGridLine(PenroseError):
    """A point lies on a grid line and no side hint was supplied."""


class EmptyRibbon(PenroseError):
    pass


class NotOnRibbon(PenroseError):
    pass


class Unreachable(PenroseError):
    """A vertex is disconnected from the origin (corrupted patch)."""


class NoConvergence(PenroseError):
    """Iterative solver hit its iteration cap."""


class OutOfRange(PenroseError):
    pass


class BoundaryHit(PenroseError):
    """A walk entered the boundary margin of its patch."""


class PathTooShort(PenroseError):
    pass


class MarginViolation(PenroseError):
    pass


class InsufficientSamples(PenroseError):
    pass
