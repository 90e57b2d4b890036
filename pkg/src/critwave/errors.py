"""Exception hierarchy shared by every module."""


class CritwaveError(Exception):
    """Base class for all package errors."""


class InvalidParameter(CritwaveError, ValueError):
    """A physical parameter is outside its admissible range (e.g. |ell| >= 1)."""


class InvalidInput(CritwaveError, ValueError):
    """Array layouts or identifiers do not match what the operation expects."""


class InvalidTime(CritwaveError, ValueError):
    """Requested time is not aligned with the characteristic lattice."""


class Unsupported(CritwaveError, NotImplementedError):
    """Operation is not available for this grid kind or dimension."""


class NumericFailure(CritwaveError, ArithmeticError):
    """Quadrature did not converge or non-finite values appeared."""


class TruncationError(CritwaveError):
    """Data reached the edge of the computational domain."""


class Undetermined(CritwaveError):
    """Not enough information to produce an estimate."""


class UndefinedVelocity(CritwaveError, ValueError):
    """The energy is non-positive, so -P/E does not define a velocity."""


class TruncationWarning(UserWarning):
    """Emitted when a requested region lies outside the grid."""


class ConfigError(CritwaveError, ValueError):
    """A scenario configuration is malformed or incomplete."""
