"""Exception types shared across the package."""


class OccpedError(Exception):
    """Base class for all errors raised by occped."""


class ValidationError(OccpedError, ValueError):
    """Input data violates a documented invariant."""


class ParseError(ValidationError):
    """A line of an annotation or detection file could not be decoded."""

    def __init__(self, message, line_number=None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class DegenerateBoxError(ValidationError):
    """An operation needs a box with positive width and height."""


class ConfigError(OccpedError, ValueError):
    """A configuration object is out of its valid range."""
