"""Exception hierarchy shared by every module and mapped to CLI exit codes."""


class SeedError(Exception):
    """Base class for all package errors."""

    exit_code = 2


class ConfigError(SeedError, ValueError):
    """Invalid hyperparameter or configuration value."""

    exit_code = 1

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class DataError(SeedError, ValueError):
    """Malformed input file, dimension mismatch or unresolved identifier."""

    exit_code = 2


class NumericError(SeedError, ArithmeticError):
    """Non-finite loss, gradient or an undefined diffusion conversion."""

    exit_code = 3
