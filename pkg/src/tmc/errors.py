"""Exception hierarchy shared across the toolkit.

The CLI maps these onto exit codes: ConfigError -> 2, DataError -> 3,
GeometryError (and subclasses) -> 4.
"""


class TmcError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(TmcError):
    """Invalid or incomplete configuration / usage."""


class DataError(TmcError):
    """Input data is missing, malformed or insufficient."""


class GeometryError(TmcError):
    """Numerical or geometric degeneracy."""


class DegenerateGeometryError(GeometryError):
    """Point configuration does not determine the requested transform."""


class HorizonError(GeometryError):
    """Point maps to (or beyond) the line at infinity."""


class NonConvergenceError(GeometryError):
    """Iterative solve failed to converge."""


class DegenerateTrackError(DataError):
    """Track has no usable extent (zero length or coincident endpoints)."""


class FrameMismatchError(DataError):
    """Operands tagged with different coordinate frames."""


class UnclassifiableError(DataError):
    """Track cannot be assigned to any movement class."""
