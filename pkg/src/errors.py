# errors.py
# Exception types shared by the toolkit. The CLI maps them to exit codes.


class KerrQptError(Exception):
    """Base class for toolkit errors."""


class ConfigError(KerrQptError, ValueError):
    """Invalid run configuration. The message starts with the dotted field path."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


class DimensionMismatchError(KerrQptError, ValueError):
    """Two objects with different Fock truncations were combined."""


class NumericError(KerrQptError, ArithmeticError):
    """A numerical failure: non-PSD drift, negative pdf mass, zero trace, undefined phase."""
