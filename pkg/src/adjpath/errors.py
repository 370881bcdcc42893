"""Exception taxonomy shared across the package."""


class AdjpathError(Exception):
    """Base class for all package errors."""


class GridError(AdjpathError):
    """Invalid time grid."""


class DimensionError(AdjpathError):
    """Inconsistent array shapes."""


class ConfigError(AdjpathError):
    """Invalid configuration value or combination."""


class DivergenceError(AdjpathError):
    """An iterative solver produced a non-finite iterate.

    Carries the last finite iterate, plus (level, iteration) context when
    raised from inside the optimization loops.
    """

    def __init__(self, message, last_iterate=None, level=None, iteration=None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.level = level
        self.iteration = iteration


class StiffnessError(AdjpathError):
    """The ODE integrator could not maintain its error control."""


class HomotopyError(AdjpathError):
    """A homotopy run failed mid-path; carries the completed prefix."""

    def __init__(self, message, level, records):
        super().__init__(message)
        self.level = level
        self.records = records
