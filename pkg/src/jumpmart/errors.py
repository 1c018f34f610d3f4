class JumpmartError(Exception):
    """Base class for all package errors."""


class ConfigError(JumpmartError, ValueError):
    """Invalid model parameters or run configuration."""


class DomainError(JumpmartError, ValueError):
    """Argument outside the domain where a quantity is defined."""


class UnsupportedModelError(JumpmartError):
    """Operation not available for the given model kind."""


class NumericError(JumpmartError, ArithmeticError):
    """A numerical routine failed to converge or exceeded its budget."""
