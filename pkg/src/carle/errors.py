"""Exception taxonomy shared across the package.

The CLI maps these onto exit codes: parameter/input problems exit 2,
numerical failures exit 3.
"""


class ParameterError(ValueError):
    """A configuration value or function argument is outside its valid range."""


class InputError(ValueError):
    """Input data is missing, empty, malformed, or has mismatched shape."""


class DegenerateWindowError(ValueError):
    """A window is constant or carries zero energy, so a feature is undefined."""


class NumericalError(RuntimeError):
    """A computation produced non-finite values and cannot continue."""
