"""Exception types shared across the toolkit.

Validation problems (bad input values, malformed files, contract violations)
raise :class:`ValidationError`; the CLI maps those to exit code 1 and plain
``OSError`` to exit code 2.
"""


class ValidationError(ValueError):
    """Input violates a documented precondition."""


class WavFormatError(ValidationError):
    """A RIFF/WAVE file is malformed or uses an unsupported encoding."""

    def __init__(self, message: str, offset: int | None = None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)


class SilentAudioError(ValidationError):
    """Converted audio has zero mean absolute amplitude."""


class RowError(ValidationError):
    """A tabular input row failed validation."""

    def __init__(self, row: int, field: str, message: str):
        self.row = row
        self.field = field
        super().__init__(f"row {row}: field '{field}': {message}")
