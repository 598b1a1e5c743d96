class CsiError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(CsiError, ValueError):
    pass


class DegenerateInputError(CsiError, ValueError):
    pass


class ShapeError(CsiError, ValueError):
    pass


class FitError(CsiError, ValueError):
    pass


class DataError(CsiError, ValueError):
    pass


class AlignmentError(DataError):
    pass


class SplitError(CsiError, ValueError):
    pass


class FormatError(CsiError, ValueError):
    pass


class DatasetIOError(CsiError, OSError):
    pass


class MetricError(CsiError, ValueError):
    pass


class ArchiveError(CsiError):
    pass


class ChecksumError(ArchiveError):
    pass


class VersionError(ArchiveError):
    pass
