"""Exception hierarchy shared across the package."""


class OpsinEvoError(Exception):
    """Base class for every error raised by opsin_evo."""


class ParameterError(OpsinEvoError, ValueError):
    """A scalar or structural parameter is outside its valid range."""


class DimensionError(OpsinEvoError, ValueError):
    """Array shapes, grids or label maps do not agree."""


class ParseError(OpsinEvoError, ValueError):
    """An on-disk container could not be read."""


class MalformedHeaderError(ParseError):
    pass


class PayloadMismatchError(ParseError):
    """Declared dimensions disagree with the number of payload bytes."""


class NegativeIntensityError(ParseError):
    pass


class GenerationError(OpsinEvoError, ValueError):
    """A synthetic scene could not be generated (e.g. a class has zero area)."""


class OptimizationError(OpsinEvoError, RuntimeError):
    """Training diverged; carries the epoch and the offending values."""

    def __init__(self, message, epoch=None, values=None):
        super().__init__(message)
        self.epoch = epoch
        self.values = values


class DegenerateRegionError(OpsinEvoError, ValueError):
    """Foreground or background is empty after morphology."""

    def __init__(self, message, side):
        super().__init__(message)
        self.side = side


class ConfigError(OpsinEvoError, ValueError):
    """An experiment description is invalid or inconsistent."""
