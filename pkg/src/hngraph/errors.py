class HnError(Exception):
    """Base class for library errors."""


class ParameterError(HnError, ValueError):
    pass


class NotFoundError(HnError, KeyError):
    pass


class LevelOverflowError(HnError, OverflowError):
    pass


class UnreachableError(HnError):
    pass


class ThresholdNotFoundError(HnError):
    pass
