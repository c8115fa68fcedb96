"""Exception types shared across the package."""


class InvalidParameterError(ValueError):
    """A scalar argument or option is out of its valid range."""


class DimensionError(ValueError):
    """Array shapes do not line up for the requested operation."""


class DegenerateInputError(ValueError):
    """Numerically degenerate input (e.g. a zero vector where a direction is needed)."""


class InvalidLabelError(InvalidParameterError):
    """A class id falls outside [0, K)."""


class FormatError(ValueError):
    """An on-disk manifest or blob violates the file format contract."""


class ConfigurationError(ValueError):
    """Dataset/prompt/config combination is inconsistent (detected before any work starts)."""
