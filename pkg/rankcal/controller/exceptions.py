class RankcalError(Exception):
    """Base class for every error raised by the toolkit."""

    pass


class MatrixFormatError(RankcalError):
    """Raised when a comparison matrix cannot be parsed or has a nonzero diagonal."""

    pass


class DimensionError(RankcalError):
    """Raised when a dimension is too small or two objects disagree on n."""

    pass


class ConsistencyError(RankcalError):
    """Raised when a matrix is expected to be additively consistent but is not."""

    pass


class TiedScoresError(RankcalError):
    """Raised when the central ranking region is undefined because scores tie."""

    pass


class ConfigError(RankcalError):
    """Raised when there's a validation error in a scenario config."""

    pass


class RegimeError(RankcalError):
    """Raised when a deformation vector violates its regime inequality."""

    pass
