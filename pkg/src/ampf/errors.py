"""Exception hierarchy shared across the package."""


class AmpfError(Exception):
    """Base class for all package errors."""


class ConfigError(AmpfError, ValueError):
    pass


class DataError(AmpfError, ValueError):
    pass


class ShapeError(DataError):
    pass


class SchemaError(DataError):
    pass


class ParseError(DataError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class OrderError(ParseError):
    pass


class DomainError(AmpfError, ValueError):
    pass


class DegenerateMetric(DomainError):
    pass


class TrainingDiverged(AmpfError, RuntimeError):
    pass


class FetchError(AmpfError, RuntimeError):
    pass


class MissingMetricError(FetchError):
    pass
