"""Exception types shared across the package."""


class CapacityError(ValueError):
    """Requested Hilbert space exceeds the configured dense-matrix limit."""


class NumericalError(ArithmeticError):
    """A numerical routine produced a result that fails its own checks."""
