"""Exception hierarchy shared by every stage of the solver."""


class PddError(Exception):
    """Base class. ``code`` is used as the CLI exit status."""

    code = 1


class InvalidArgument(PddError, ValueError):
    code = 2


class ConfigurationError(PddError):
    code = 3


class UnsupportedConfiguration(ConfigurationError):
    code = 4


class HorizonExhausted(PddError):
    """An elliptic path never reached an absorbing face."""

    code = 5


class DivergenceError(PddError, RuntimeError):
    code = 6


class AssumptionViolation(PddError):
    code = 7


class MissingDatum(PddError):
    code = 8


class IncompleteGrid(PddError):
    code = 9


class InvalidMeasurement(PddError):
    code = 10
