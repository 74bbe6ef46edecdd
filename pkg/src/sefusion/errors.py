"""Exception types shared across the toolkit."""


class SefusionError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(SefusionError, ValueError):
    """A configuration value violates a documented invariant."""


class FramingError(SefusionError, ValueError):
    """Signal cannot be framed with the requested window/hop geometry."""


class ShapeError(SefusionError, ValueError):
    """Array shapes disagree with the metadata that travels with them."""


class WavFormatError(SefusionError, ValueError):
    """WAV file is malformed or uses an unsupported encoding."""


class NumericsError(SefusionError, ArithmeticError):
    """A numerical routine failed to converge within its budget."""


class MetricError(SefusionError, ValueError):
    """Objective metric cannot be computed on the given pair of signals."""
