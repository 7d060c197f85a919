"""Exception hierarchy shared by all modules."""


class LampError(Exception):
    """Base class for every error raised by this package."""


# I/O and format problems (CLI exit code 2)
class IOFailure(LampError):
    pass


class NotFound(IOFailure, FileNotFoundError):
    pass


class UnsupportedFormat(IOFailure):
    pass


class CorruptData(IOFailure):
    pass


class ParseError(IOFailure):
    pass


class MissingLabelInfo(ParseError):
    pass


class VersionMismatch(ParseError):
    pass


class DigestMismatch(IOFailure):
    pass


# numeric failures (CLI exit code 3)
class NumericFailure(LampError):
    pass


class NonPSDInput(NumericFailure):
    pass


# contract violations on arguments (CLI exit code 1)
class InvalidInput(LampError, ValueError):
    pass


class OutOfBounds(InvalidInput):
    pass


class EmptySamples(InvalidInput):
    pass


class EmptySet(InvalidInput):
    pass


class EmptyBlob(InvalidInput):
    pass


class ShapeMismatch(InvalidInput):
    pass


class WindowTooLarge(InvalidInput):
    pass


class ZeroStride(InvalidInput):
    pass


class TooManyCombinations(InvalidInput):
    pass


class NoFeasibleSet(LampError):
    pass


class MissingStage1Checkpoint(LampError):
    pass
