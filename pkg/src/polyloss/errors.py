"""Exception taxonomy shared by all modules.

Plain I/O failures (missing files, unreadable paths) raise the builtin
``OSError`` family; everything domain-specific derives from ``PolyLossError``
so callers can catch one base class.
"""


class PolyLossError(Exception):
    """Base class for all domain errors raised by this package."""


class DegeneratePolygon(PolyLossError):
    """Ring has fewer than 3 usable vertices or collapses to (near) zero area."""


class NotSimple(PolyLossError):
    """A polygon required to be simple has self-intersections."""


class TopologyUnresolved(PolyLossError):
    """Clipping could not reach a consistent crossing topology after the
    bounded number of perturbation retries."""


class ShapeMismatch(PolyLossError):
    """Two vertex codes (or grids) that must agree in shape do not."""


class WrongSystem(PolyLossError):
    """A vertex code is in the wrong coordinate system for the operation."""


class EmptyMask(PolyLossError):
    """An instance mask contains no foreground pixels."""


class MissingCenter(PolyLossError):
    """Oracle evaluation found no polygon code for a ground-truth center."""


class FormatError(PolyLossError):
    """A file does not conform to its declared format.

    ``offset`` carries the byte offset of the first offending byte when it is
    known, else ``None``.
    """

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset
