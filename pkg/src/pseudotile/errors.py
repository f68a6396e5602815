"""Exception and warning classes raised across the package."""


class PseudotileError(Exception):
    """Base class for all errors raised by pseudotile."""


class NotExpanding(PseudotileError):
    pass


class PowerExhausted(PseudotileError):
    pass


class EmptyRegion(PseudotileError):
    pass


class OutOfWindow(PseudotileError):
    pass


class LabelGeometryMismatch(PseudotileError):
    pass


class PatchNotFound(PseudotileError):
    pass


class UnknownLabel(PseudotileError):
    pass


class WindowTooSmall(PseudotileError):
    pass


class NoClearPoint(PseudotileError):
    pass


class EmptyImage(PseudotileError):
    pass


class InconsistentDigits(PseudotileError):
    pass


class MaxIterExceeded(PseudotileError):
    pass


class RasterOverflow(PseudotileError):
    pass


class IndexMismatch(PseudotileError):
    pass


class NoPassingRadius(PseudotileError):
    pass


class OriginOutside(PseudotileError):
    pass


class DegenerateLocators(PseudotileError):
    pass


class UnsupportedDimension(PseudotileError):
    pass


class TooManyLabels(PseudotileError):
    pass


class ParseError(PseudotileError):
    def __init__(self, message: str, line: int = 0, column: int = 0):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class ValidationError(PseudotileError):
    pass


class DuplicateCollision(UserWarning):
    """Two images of the multiset map landed on the same point."""


class BoundaryTie(UserWarning):
    """A reference point sits within tolerance of a tile boundary."""
