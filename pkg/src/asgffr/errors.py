"""Exception types shared across the toolkit.

The CLI maps :class:`ConfigError` to exit code 2 and :class:`NumericalError`
to exit code 3.
"""


class ConfigError(ValueError):
    """Invalid parameters, scenario settings or input files."""


class NumericalError(ArithmeticError):
    """A solver failed to converge or produced a non-finite result."""
