"""Exception types shared across the package."""


class WaveLabError(Exception):
    """Base class for all package errors."""


class PoleAtZeroMean(WaveLabError):
    """A multiplier singular at xi=0 was applied to a field with nonzero mean."""


class IndexOutOfRange(WaveLabError):
    pass


class GridMismatch(WaveLabError):
    pass


class UnsupportedRho(WaveLabError):
    pass


class InsufficientRange(WaveLabError):
    pass


class DegenerateSurface(WaveLabError):
    """inf |1 + W_alpha| fell below the non-degeneracy threshold."""


class NewtonNoConvergence(WaveLabError):
    pass


class StepTooLarge(WaveLabError):
    pass


class ConfigError(WaveLabError):
    """Base for configuration problems; ``key`` names the offending entry."""

    def __init__(self, key: str, message: str = "") -> None:
        self.key = key
        super().__init__(f"{key}: {message}" if message else key)


class ParseError(ConfigError):
    pass


class SchemaError(ConfigError):
    pass


class RangeError(ConfigError):
    pass


class CheckpointError(WaveLabError):
    pass
