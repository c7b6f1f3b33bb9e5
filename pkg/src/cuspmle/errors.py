"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: validation problems exit 1,
threshold violations exit 2, numerical failures exit 3.
"""


class CuspError(Exception):
    """Base class for all package errors."""


class ValidationError(CuspError, ValueError):
    """Invalid parameters, configuration, or operation preconditions."""


class NumericalError(CuspError, RuntimeError):
    """A numerical routine failed to reach its required accuracy."""


class ThresholdError(CuspError, RuntimeError):
    """An experiment report violated a configured acceptance threshold."""
