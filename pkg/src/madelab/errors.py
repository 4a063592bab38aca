"""Exception types raised across the package."""


class MadelabError(Exception):
    """Base class for all package errors."""


class ConfigError(MadelabError, ValueError):
    """Invalid configuration or out-of-range parameter."""


class DimensionError(MadelabError, ValueError):
    """Fields live on incompatible grids."""


class DegenerateStateError(MadelabError, ValueError):
    """A density or wavefunction is identically zero."""


class InsufficientDataError(MadelabError, ValueError):
    """Not enough snapshots for a finite-difference estimate."""


class BranchWrapError(MadelabError, ArithmeticError):
    """Phase advanced by pi or more between snapshots; reduce dt."""


class InvalidLoopError(MadelabError, ValueError):
    """Circulation loop leaves the grid or crosses the node mask."""


class UnreliableStatisticsError(MadelabError, RuntimeError):
    """Too many ensemble members exited to trust the statistic."""


class FormatError(MadelabError, IOError):
    """Malformed or truncated field file."""
