"""Exception hierarchy shared by every stage of the stabilizer."""


class StabilizerError(Exception):
    """Base class for all errors raised by uavstab."""


class InvalidInputError(StabilizerError, ValueError):
    pass


class InvalidTransformError(StabilizerError, ValueError):
    pass


class ConfigError(StabilizerError, ValueError):
    pass


class DegenerateInputError(StabilizerError, ValueError):
    """Too few or coincident point pairs for a least-squares fit."""


class SequenceError(StabilizerError):
    """Frames were delivered out of index order."""


class NotReadyError(StabilizerError):
    """A smoothing window still needs frames that have not arrived."""


class UnusableFixtureError(StabilizerError, ValueError):
    pass


class PipelineError(StabilizerError):
    """A pipeline stage failed; the original exception is chained."""


class MediaError(StabilizerError, OSError):
    pass


class MalformedHeaderError(MediaError):
    pass


class DimensionMismatchError(MediaError):
    pass


class UnreadableStreamError(MediaError):
    pass


class UnwritablePathError(MediaError):
    pass
