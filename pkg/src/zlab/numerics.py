"""Geometric predicates, reflection folding and extended-range magnitudes.

Points are numpy arrays whose last axis has length 3; every function here
broadcasts over leading axes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from zlab.errors import DomainError

# Mantissa band of a canonical LogScalar at height >= 1.  The upper edge
# keeps exp(mantissa) finite in double precision; the lower edge is
# log(upper) so that consecutive heights tile the half-line without overlap.
MANTISSA_HI = 700.0
MANTISSA_LO = math.log(MANTISSA_HI)
MAX_HEIGHT = 64


class FoldResult(NamedTuple):
    value: np.ndarray | float
    parity: np.ndarray | int


def fold(t):
    """Fold the real line onto [-1, 1] by repeated reflection.

    ``parity`` is 1 on tiles reached by an odd number of reflections.
    """
    t = np.asarray(t, dtype=float)
    w = np.mod(t + 1.0, 4.0)
    core = np.abs(t) <= 1.0
    upper = (w > 2.0) & ~core
    value = np.where(core, t, np.where(upper, 3.0 - w, w - 1.0))
    parity = upper.astype(np.int64)
    if value.ndim == 0:
        return FoldResult(float(value), int(parity))
    return FoldResult(value, parity)


def beam_of(x):
    """Index s of the beam T(s) containing x; boundary ties go to the smaller s."""
    x = np.asarray(x, dtype=float)
    s = np.ceil((x[..., :2] - 1.0) / 2.0).astype(np.int64)
    if s.ndim == 1:
        return (int(s[0]), int(s[1]))
    return s


def beam_boundary_distance(x):
    """Sup-norm distance from (x1, x2) to the boundary of its beam cross-section."""
    x = np.asarray(x, dtype=float)
    frac = np.abs(np.mod(x[..., :2] + 1.0, 2.0) - 1.0)
    return np.min(1.0 - frac, axis=-1)


def in_omega(x):
    x = np.asarray(x, dtype=float)
    return x[..., 2] > np.abs(x[..., 0]) + np.abs(x[..., 1])


def in_ball_K(x, t):
    """Membership in the closed ball with centre (0, 0, t) and radius t/2."""
    x = np.asarray(x, dtype=float)
    d2 = x[..., 0] ** 2 + x[..., 1] ** 2 + (x[..., 2] - t) ** 2
    return d2 <= 0.25 * t * t


def in_box_Q(x, t, margin=0.0):
    """Membership in Q(t), optionally shrunk by ``margin`` on every face."""
    x = np.asarray(x, dtype=float)
    lo, hi = t / 6.0 + margin, t / 4.0 - margin
    ok = (x[..., 0] >= lo) & (x[..., 0] <= hi)
    ok &= (x[..., 1] >= lo) & (x[..., 1] <= hi)
    ok &= np.abs(x[..., 2] - t) <= t / 4.0 - margin
    if margin > 0.0:
        d = np.sqrt(x[..., 0] ** 2 + x[..., 1] ** 2 + (x[..., 2] - t) ** 2)
        return ok & (d <= t / 2.0 - margin)
    return ok & in_ball_K(x, t)


def region_membership(x, region, t=None, net=None):
    """Dispatch to the predicate for ``region`` in {"Omega", "K", "Q", "T"}."""
    if region == "Omega":
        return in_omega(x)
    if region in ("K", "Q"):
        if t is None or t <= 0:
            raise DomainError(f"region {region} needs t > 0")
        return in_ball_K(x, t) if region == "K" else in_box_Q(x, t)
    if region == "T":
        if net is None:
            raise DomainError("region T needs a net")
        return net.contains_point(x)
    raise DomainError(f"unknown region {region!r}")


def _normalize(height, y):
    if not math.isfinite(y):
        raise DomainError(f"non-finite mantissa {y!r}")
    while y >= MANTISSA_HI:
        y = math.log(y)
        height += 1
    while height >= 1 and y < MANTISSA_LO:
        y = math.exp(y)
        height -= 1
    if height > MAX_HEIGHT:
        raise DomainError(f"height {height} exceeds supported range")
    return height, y


@dataclass(frozen=True)
class LogScalar:
    """The magnitude exp^height(mantissa), kept in canonical form.

    Canonical means height 0 with mantissa < 700, or height >= 1 with the
    mantissa in [log 700, 700).  Height-0 mantissas may be negative when the
    scalar is itself the log of a number below one.
    """

    height: int
    mantissa: float

    def __post_init__(self):
        h, y = _normalize(int(self.height), float(self.mantissa))
        object.__setattr__(self, "height", h)
        object.__setattr__(self, "mantissa", y)

    @classmethod
    def from_real(cls, v):
        if v < 0 or not math.isfinite(v):
            raise DomainError(f"LogScalar needs a finite nonnegative value, got {v!r}")
        return cls(0, float(v))

    @classmethod
    def from_log(cls, log_value):
        """Scalar whose natural log is ``log_value`` (a float or LogScalar)."""
        if isinstance(log_value, LogScalar):
            return log_value.exp()
        if log_value == -math.inf:
            return cls(0, 0.0)
        if log_value < MANTISSA_LO:
            return cls(0, math.exp(log_value))
        return cls(1, float(log_value))

    def exp(self):
        if self.height == 0 and self.mantissa < MANTISSA_LO:
            return LogScalar(0, math.exp(self.mantissa))
        if self.height == 0:
            return LogScalar(1, self.mantissa)
        return LogScalar(self.height + 1, self.mantissa)

    def log(self):
        if self.height == 0:
            if self.mantissa <= 0.0:
                raise DomainError("log of a nonpositive LogScalar")
            return LogScalar(0, math.log(self.mantissa))
        return LogScalar(self.height - 1, self.mantissa)

    def log_float(self):
        """Natural log as a float; inf when that itself overflows."""
        lg = self.log()
        return lg.to_float()

    def to_float(self):
        if self.height == 0:
            return self.mantissa
        if self.height == 1:
            return math.exp(self.mantissa)
        return math.inf

    def mul_real(self, c):
        """Product with a positive real constant."""
        if c <= 0:
            raise DomainError("mul_real needs c > 0")
        if self.height == 0:
            return LogScalar(0, self.mantissa * c)
        return LogScalar.from_log(self.log().add_real(math.log(c)))

    def add_real(self, c):
        """Sum with a real constant (result must stay nonnegative at height 0)."""
        if self.height == 0:
            return LogScalar(0, self.mantissa + c)
        if self.height == 1:
            y = self.mantissa
            return LogScalar(1, y + math.log1p(c * math.exp(-y)))
        # exp^2(log 700) > 1e300: any double-sized c is below resolution
        return self

    def __lt__(self, other):
        return logscalar_cmp(self, other, rtol=0.0) < 0

    def __le__(self, other):
        return logscalar_cmp(self, other, rtol=0.0) <= 0

    def __gt__(self, other):
        return logscalar_cmp(self, other, rtol=0.0) > 0

    def __ge__(self, other):
        return logscalar_cmp(self, other, rtol=0.0) >= 0

    def __repr__(self):
        return f"exp^{self.height}({self.mantissa!r})"


def logscalar_normalize(height, mantissa):
    return LogScalar(height, mantissa)


def logscalar_from_real(v):
    return LogScalar.from_real(v)


def logscalar_log(a):
    return a.log()


def logscalar_cmp(a, b, rtol=1e-9):
    """Three-way comparison; equal mantissas within ``rtol`` compare as 0."""
    if not isinstance(a, LogScalar):
        a = LogScalar.from_real(a)
    if not isinstance(b, LogScalar):
        b = LogScalar.from_real(b)
    if a.height != b.height:
        return -1 if a.height < b.height else 1
    ya, yb = a.mantissa, b.mantissa
    if abs(ya - yb) <= rtol * max(abs(ya), abs(yb)):
        return 0
    return -1 if ya < yb else 1


def tower_exp(R, m):
    """The m-fold iterated exponential exp^m(R) as a LogScalar."""
    if R <= 0:
        raise DomainError("tower_exp needs R > 0")
    if m < 0:
        raise DomainError("tower_exp needs m >= 0")
    return LogScalar(int(m), float(R))


def tower_exp_float(R, m):
    """exp^m(R) as a float, inf once it leaves double range."""
    v = float(R)
    for _ in range(m):
        if v > 709.0:
            return math.inf
        v = math.exp(v)
    return v
