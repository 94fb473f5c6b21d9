"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid parameter combination or malformed configuration input."""


class CsvParseError(ValueError):
    """CSV ingestion failure, carrying row/column context in the message."""


class OutOfBagError(RuntimeError):
    """Raised when an estimator needs out-of-bag rows and none exist."""
