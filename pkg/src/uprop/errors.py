"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Operands have incompatible dimensions."""


class ConfigError(ValueError):
    """A run configuration value is invalid or unknown."""


class DataError(ValueError):
    """Input data violates a format or content requirement."""


class CheckpointNotFoundError(FileNotFoundError):
    """A required model checkpoint file is absent."""
