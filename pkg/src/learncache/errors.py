"""Exception types raised across the package."""


class ParameterError(ValueError):
    """An argument is outside its allowed range."""


class InstanceTooLargeError(ValueError):
    """The exhaustive oracle was asked to solve an instance beyond its guard."""


class MissingPredictionsError(ValueError):
    """A prediction-consuming policy was run on a trace without predictions."""


class TraceFormatError(ValueError):
    """A trace file could not be parsed."""


class ConfigError(ValueError):
    """An experiment config is malformed or inconsistent."""
