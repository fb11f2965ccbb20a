"""Exception types shared across the package."""


class TaucohError(Exception):
    """Base class for all package errors."""


class ConfigError(TaucohError):
    """A configuration value is out of its documented domain."""


class StreamShapeError(TaucohError):
    """A frame's channel count does not match the established stream width."""


class InputQualityError(TaucohError):
    """A sample is non-finite or otherwise unusable.

    Carries the offending channel index and the window length at which the
    problem was seen, so operators can locate the bad sensor.
    """

    def __init__(self, message: str, bus: int | None = None, k: int | None = None):
        super().__init__(message)
        self.bus = bus
        self.k = k


class DataFormatError(TaucohError):
    """A file or stream payload violates the documented format.

    ``line`` is the 1-based line number in the source when known.
    """

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message)
        self.line = line


class InsufficientDataError(TaucohError):
    """The stream ended before the warm-up requirement was met."""
