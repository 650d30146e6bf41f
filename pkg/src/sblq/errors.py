"""Exception types shared across the package.

The CLI maps these onto exit codes, so library code should prefer them over
bare exceptions whenever the failure class is known.
"""


class ConfigError(ValueError):
    """Invalid run configuration: unknown keys, bad types, locked overrides."""


class DataError(ValueError):
    """Malformed or inconsistent dataset files."""


class NumericError(ArithmeticError):
    """Numerical failure inside a fit (non-finite values, broken inputs)."""
