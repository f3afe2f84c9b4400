"""Exception types shared across the package."""


class FencError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(FencError):
    """An array does not have the shape an operation requires."""

    def __init__(self, what, expected, actual):
        self.expected = expected
        self.actual = actual
        super().__init__(f"{what}: expected shape {expected}, got {actual}")


class NumericalError(FencError):
    """A numerical routine failed (singular solve, non-convergence, ...)."""


class ConfigError(FencError):
    """Invalid configuration file or command-line usage."""


class ModelFormatError(FencError):
    """A model file is corrupt or has an unsupported format version."""
