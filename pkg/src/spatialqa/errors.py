"""Exception hierarchy shared across the package.

``ValidationError`` covers bad inputs (exit status 2 in the CLI); plain
``OSError`` subclasses are environment / I/O failures (exit status 1).
"""


class ValidationError(ValueError):
    """Input violates a documented precondition or schema."""


class WavFormatError(ValidationError):
    """Payload is not a readable RIFF/WAVE file."""


class ChannelCountError(ValidationError):
    pass


class BitDepthError(ValidationError):
    pass


class DimensionError(ValidationError):
    pass


class MetadataError(ValidationError):
    """Malformed metadata CSV row; ``row`` is 1-based."""

    def __init__(self, message: str, row: int | None = None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


class SchemaError(ValidationError):
    """Benchmark element violates the QA schema; ``index`` is 0-based."""

    def __init__(self, message: str, index: int | None = None):
        self.index = index
        if index is not None:
            message = f"element {index}: {message}"
        super().__init__(message)


class ContainerError(ValidationError):
    pass
