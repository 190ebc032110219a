"""Exception types shared across the package.

The CLI maps these onto exit codes: :class:`DataError` -> 2,
:class:`NumericalError` -> 3.
"""


class NetblockError(Exception):
    """Base class for all package errors."""


class DataError(NetblockError, ValueError):
    """Invalid input data: shape mismatch, malformed file, bad labels."""


class NumericalError(NetblockError, FloatingPointError):
    """A numerical routine produced non-finite values or failed."""
