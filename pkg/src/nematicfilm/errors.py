"""Exception types shared across the package."""


class InputError(ValueError):
    """An argument violates a documented precondition."""


class DegeneracyError(RuntimeError):
    """A quantity is undefined for the given input (e.g. winding of a
    vanishing in-plane component)."""


class StateError(RuntimeError):
    """An operation was called before required calibration/setup."""


class NumericalError(RuntimeError):
    """An iterative procedure failed to produce a usable result."""


class ConfigError(ValueError):
    """A scenario configuration is missing or malformed."""
