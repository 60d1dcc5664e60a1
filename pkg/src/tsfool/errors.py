"""Exception taxonomy shared by the library, service, and CLI.

The CLI maps these onto its exit-code contract: config/usage problems
exit 2, data/shape problems exit 3, numerical failures exit 4.
"""


class TsfoolError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(TsfoolError):
    """Invalid configuration, flags, or preconditions on user-chosen values."""


class DataError(TsfoolError):
    """Malformed or unusable input data (CSV contents, empty datasets, ...)."""


class ShapeError(DataError):
    """Tensor/dataset dimension mismatch."""


class NumericalError(TsfoolError):
    """Non-finite values encountered where finite ones are required."""
