"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid configuration, including dimension mismatches."""


class DegenerateInputError(ValueError):
    """Input on which the operation is undefined (e.g. hashing a zero vector)."""


class ParseError(ValueError):
    """Malformed dataset file; carries the offending line number when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(message if line is None else f"line {line}: {message}")
