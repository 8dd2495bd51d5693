"""
Error and warning classes shared by every module.
Each error knows its category and the exit code the command line uses for it.
"""


class AmsError(Exception):
    """Base class for every error raised on purpose by this project."""
    category = 'internal'
    exit_code = 5


class ConfigError(AmsError):
    """Invalid settings, flags or parameter combinations."""
    category = 'config'
    exit_code = 2


class EmptySystem(ConfigError):
    """No candidate region survives the requested scale restriction."""


class DataError(AmsError):
    """Input data that cannot be used as given."""
    category = 'data'
    exit_code = 3


class ParseError(DataError):
    """
    A grid file could not be parsed.
    Keeps the 1-based line (and byte offset when known) of the problem.
    """

    def __init__(self, message, line=None, offset=None):
        self.line = line
        self.offset = offset
        where = []
        if line is not None:
            where.append(f"line {line}")
        if offset is not None:
            where.append(f"offset {offset}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class ShapeError(DataError):
    """Declared grid shape does not match the payload."""


class SizeError(DataError):
    """Field and region system do not share (n, d)."""


class NegativeCount(DataError):
    """A photon-count field contains a negative or fractional value."""


class DomainError(DataError, ValueError):
    """Parameters or arguments outside the domain of a formula."""


class StoreError(DataError):
    """The quantile store could not be read or written."""


class DegenerateData(AmsError):
    """Data that makes standardization impossible (e.g. a constant field)."""
    category = 'degenerate'
    exit_code = 4


class CacheCorrupt(AmsError):
    """A stored quantile table failed its checksum or format check."""


class ScaleAdvisory(UserWarning):
    """Scale restriction looks too loose for the estimated-parameter theory."""


class CacheWarning(UserWarning):
    """A cached quantile table was discarded and re-simulated."""


class ExportWarning(UserWarning):
    """Values had to be clipped to fit an output format."""
