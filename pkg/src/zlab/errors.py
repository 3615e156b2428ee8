"""Exception hierarchy shared by all zlab modules."""


class ZlabError(Exception):
    """Base class for every error raised by zlab."""


class DomainError(ZlabError, ValueError):
    """Argument outside the domain where an operation is defined."""


class ConvergenceError(ZlabError, ArithmeticError):
    """An iterative solver did not converge."""


class DegenerateSampleError(ZlabError, ArithmeticError):
    """A finite-difference Jacobian is numerically singular."""


class ConfigError(ZlabError, ValueError):
    """Invalid configuration."""


class OutOfRangeError(ZlabError, ValueError):
    """Query outside the region a precomputed structure certifies."""


class FormatError(ZlabError, ValueError):
    """Malformed or version-mismatched file."""


class VerificationError(ZlabError):
    """An exact property check failed; ``witness`` holds the offending data."""

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness
