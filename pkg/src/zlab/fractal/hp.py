"""High-precision branch composition for anchor chains.

Anchors below level 1 sit at heights like e^3000, where a double cannot
even locate the beam of a point.  The chain x = h_m^{-1}(p) and its forward
check are therefore carried out in mpmath with enough digits to resolve
O(1) offsets at the largest magnitude involved.
"""

from __future__ import annotations

import math

import mpmath as mp

from zlab.errors import ConvergenceError, DomainError

GUARD_DIGITS = 40
MAX_DIGITS = 20_000


def digits_for(log_magnitude):
    """Working precision (decimal digits) for numbers of size e^log_magnitude."""
    d = int(max(0.0, float(log_magnitude)) / math.log(10.0)) + GUARD_DIGITS
    if d > MAX_DIGITS:
        raise DomainError(f"{d} digits needed; beyond the supported precision budget")
    return d


def sign_of(n):
    return -1 if int(n) % 2 else 1


def Lambda(y, s):
    """Branch of Z^{-1} with values in the beam T(s)."""
    s1, s2 = int(s[0]), int(s[1])
    sigma = sign_of(s1 + s2)
    a = max(abs(y[0]), abs(y[1])) + sigma * y[2]
    if a <= 0:
        raise DomainError(f"point outside the image half-space of beam {s}")
    return [2 * s1 + sign_of(s1) * y[0] / a, 2 * s2 + sign_of(s2) * y[1] / a, mp.log(a)]


def phi(x, inverse=False):
    shift = abs(x[0]) + abs(x[1])
    return [x[0], x[1], x[2] + shift if inverse else x[2] - shift]


def H_inv(y, s):
    return phi(Lambda(y, s), inverse=True)


def G_inv(y, s, L, max_iter=200):
    """Solve x + Z(x) = y in T(s) by x <- Lambda_s(y - x)."""
    x = Lambda(y, s)
    eps = mp.mpf(10) ** (-(mp.mp.dps - 10))
    for _ in range(max_iter):
        nx = Lambda([y[0] - x[0], y[1] - x[1], y[2] - x[2]], s)
        step = max(abs(nx[i] - x[i]) for i in range(3))
        x = nx
        if step <= eps * max(1, abs(x[2])):
            break
    else:
        raise ConvergenceError(f"high-precision G inverse on beam {s} did not converge")
    if x[2] < L:
        raise DomainError("point below the range where G is x + Z(x)")
    return x


def fold(t):
    w = (t + 1) - 4 * mp.floor((t + 1) / 4)
    if abs(t) <= 1:
        return t, 0
    return (w - 1, 0) if w <= 2 else (3 - w, 1)


def face(x):
    f1, p1 = fold(x[0])
    f2, p2 = fold(x[1])
    sigma = -1 if (p1 + p2) % 2 else 1
    return [f1, f2, sigma * (1 - max(abs(f1), abs(f2)))]


def Z(x):
    e = mp.exp(x[2])
    return [e * v for v in face(x)]


def H(x):
    return Z(phi(x))


def G(y, L):
    lam = min(max(y[2] / L, 0), 1)
    z = Z(y)
    return [y[i] + lam * z[i] for i in range(3)]


def norm(v):
    return mp.sqrt(sum(c * c for c in v))


def rel_diff(a, b):
    d = norm([a[i] - b[i] for i in range(3)])
    return d / max(norm(b), mp.mpf(1))


def k_eta(k):
    k = mp.mpf(k)
    return k * mp.log(mp.log(k))


def k_eta_inverse(v):
    """Real k >= 3 with k log log k = v (Newton in working precision)."""
    v = mp.mpf(v)
    k = max(v / mp.log(mp.log(max(v, 16))), mp.mpf(3))
    for _ in range(200):
        lk = mp.log(k)
        step = (k * mp.log(lk) - v) / (mp.log(lk) + 1 / lk)
        k = max(k - step, mp.mpf(3))
        if abs(step) <= k * mp.mpf(10) ** (-(mp.mp.dps - 10)):
            break
    return k


def to_float_log(x):
    """log|x| as a float (never overflows for mpf inputs)."""
    if x == 0:
        return -math.inf
    return float(mp.log(abs(x)))
