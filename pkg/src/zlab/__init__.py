"""zlab: a numerical laboratory for the pyramid-Zorich construction of a
quasiregular self-map of R^3 whose fast escaping set has prescribed
dimension rho in [1, 3)."""

from zlab.errors import (
    ConfigError,
    ConvergenceError,
    DegenerateSampleError,
    DomainError,
    FormatError,
    OutOfRangeError,
    VerificationError,
    ZlabError,
)
from zlab.numerics import LogScalar, beam_of, fold, tower_exp

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "ConvergenceError",
    "DegenerateSampleError",
    "DomainError",
    "FormatError",
    "LogScalar",
    "OutOfRangeError",
    "VerificationError",
    "ZlabError",
    "beam_of",
    "fold",
    "tower_exp",
]
