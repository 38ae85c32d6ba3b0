"""Exception hierarchy shared by all radarmot modules."""

from __future__ import annotations


class RadarMotError(Exception):
    """Base class for every error raised by radarmot."""


class InvalidPose(RadarMotError):
    pass


class InvalidBox(RadarMotError):
    pass


class DegenerateBearing(RadarMotError):
    pass


class InvalidFactor(RadarMotError):
    pass


class EmptyBundle(RadarMotError):
    pass


class NegativeDt(RadarMotError):
    pass


class SingularInnovationCovariance(RadarMotError):
    pass


class EmptyPointSet(RadarMotError):
    pass


class InvalidConfig(RadarMotError):
    pass


class InvalidRecall(RadarMotError):
    pass


class NoPositives(RadarMotError):
    pass


class DataError(RadarMotError):
    """Malformed or inconsistent input data (CLI exit code 2)."""


class NonMonotonicTime(DataError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class SchemaMismatch(DataError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class VersionUnsupported(DataError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class IoError(DataError, OSError):
    pass
