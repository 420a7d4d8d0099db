"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Operand shapes are incompatible."""


class ContractError(ValueError):
    """A precondition of an operation was violated."""


class SchemaError(ValueError):
    """Input file layout does not match the expected columns."""


class DataError(ValueError):
    """Input values are malformed (bad row, duplicate dates, sentinels)."""


class DegenerateFeatureError(ValueError):
    """A feature has max == min on the fitting rows and cannot be scaled."""


class TrainingError(RuntimeError):
    """Training diverged."""

    def __init__(self, message, epoch=None):
        super().__init__(message)
        self.epoch = epoch


class ConfigurationError(ValueError):
    """Benchmark configuration is inconsistent."""
