"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid configuration or parameters; raised before any work runs."""


class DataError(ValueError):
    """Input data cannot be processed."""


class ParseError(DataError):
    """A malformed ledger row.

    ``line`` is the 1-based physical line in the CSV, ``column`` the
    offending column name (``None`` for whole-row problems).
    """

    def __init__(self, message: str, line: int | None = None, column: str | None = None):
        self.line = line
        self.column = column
        where = f"line {line}" if line is not None else "unknown line"
        if column:
            where += f", column {column}"
        super().__init__(f"{where}: {message}")


class AlgorithmError(RuntimeError):
    """A clustering fit failed (e.g. a collapsed mixture component)."""
