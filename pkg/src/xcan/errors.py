"""Exception types shared across the package."""


class XcanError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(XcanError, ValueError):
    """Malformed or out-of-contract input data, labels, or options."""


class NumericalError(XcanError, RuntimeError):
    """Numerical failure: non-finite objective, failed check, or solver breakdown."""
