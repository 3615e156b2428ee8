"""The map zoo: pyramid face map h, Zorich map Z, shear phi, H = Z o phi,
the surrogate G, the glued map f, their inverse branches on beams, and
finite-difference Jacobian sampling.

All maps accept arrays of shape (..., 3).  The plain variants raise
:class:`DomainError` when the result would overflow; the ``log_abs_*``
helpers return natural logs of magnitudes and never overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from zlab.errors import ConvergenceError, DegenerateSampleError, DomainError
from zlab.numerics import LogScalar, beam_boundary_distance, fold

# exp(EXP_SAFE) * sqrt(2) is still a finite double
EXP_SAFE = 708.0
SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class MapParams:
    """Parameters of the surrogate G.

    ``L`` is the ramp height, ``R_cert`` the smallest height treated as
    certified, ``C_disp`` the displacement bound |G(x) - x| on x3 <= L.
    """

    L: float = 2.0
    R_cert: float = 5.0
    C_disp: float = field(default=math.nan)

    def __post_init__(self):
        if not self.L > 0:
            raise DomainError("MapParams.L must be positive")
        bound = SQRT2 * math.exp(self.L)
        if math.isnan(self.C_disp):
            object.__setattr__(self, "C_disp", bound)
        elif self.C_disp < bound * (1 - 1e-12):
            raise DomainError(f"C_disp={self.C_disp} below sqrt(2)*e^L={bound}")


def _as_points(x):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != 3:
        raise DomainError(f"expected points with 3 coordinates, got shape {x.shape}")
    return x


def _check_finite_exp(e3, what):
    if np.any(e3 > EXP_SAFE):
        raise DomainError(f"{what} overflows double precision; use the log-magnitude variant")


def pyramid_h(u1, u2):
    u1 = np.asarray(u1, dtype=float)
    u2 = np.asarray(u2, dtype=float)
    if np.any(np.abs(u1) > 1.0 + 1e-12) or np.any(np.abs(u2) > 1.0 + 1e-12):
        raise DomainError("pyramid_h is defined on the square [-1, 1]^2")
    return np.stack([u1, u2, 1.0 - np.maximum(np.abs(u1), np.abs(u2))], axis=-1)


def _face(x):
    """Signed face vector (hv1, hv2, sigma*hv3) of Z before the e^{x3} factor."""
    f1, p1 = fold(x[..., 0])
    f2, p2 = fold(x[..., 1])
    sigma = 1.0 - 2.0 * np.mod(np.asarray(p1) + np.asarray(p2), 2)
    h3 = 1.0 - np.maximum(np.abs(f1), np.abs(f2))
    return np.stack(np.broadcast_arrays(f1, f2, sigma * h3), axis=-1)


def _Z(x):
    with np.errstate(over="ignore"):
        return np.exp(x[..., 2])[..., None] * _face(x)


def zorich_Z(x):
    x = _as_points(x)
    _check_finite_exp(x[..., 2], "Z")
    return _Z(x)


def zorich_Z_branch(x, s):
    """The formula of Z on the beam T(s), continued to any x."""
    x = _as_points(x)
    s1, s2 = int(s[0]), int(s[1])
    u1 = (-1.0) ** s1 * (x[..., 0] - 2 * s1)
    u2 = (-1.0) ** s2 * (x[..., 1] - 2 * s2)
    sigma = (-1.0) ** (s1 + s2)
    h = np.stack([u1, u2, sigma * (1.0 - np.maximum(np.abs(u1), np.abs(u2)))], axis=-1)
    return np.exp(x[..., 2])[..., None] * h


def _lognorm(v):
    m = np.max(np.abs(v), axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        safe = np.where(m > 0, m, 1.0)
        r = v / safe[..., None]
        out = np.log(safe) + 0.5 * np.log(np.sum(r * r, axis=-1))
    return np.where(m > 0, out, -np.inf)


def log_abs_Z(x):
    x = _as_points(x)
    return x[..., 2] + _lognorm(_face(x))


def zorich_Z_logmag(x):
    """Unit direction of Z(x) and |Z(x)| as a LogScalar (single point)."""
    x = _as_points(x)
    face = _face(x)
    direction = face / np.linalg.norm(face)
    return direction, LogScalar.from_log(float(log_abs_Z(x)))


def shear_phi(x, direction="forward"):
    x = _as_points(x)
    shift = np.abs(x[..., 0]) + np.abs(x[..., 1])
    if direction == "forward":
        x3 = x[..., 2] - shift
    elif direction == "inverse":
        x3 = x[..., 2] + shift
    else:
        raise DomainError(f"direction must be 'forward' or 'inverse', not {direction!r}")
    return np.stack([x[..., 0], x[..., 1], x3], axis=-1)


def map_H(x):
    return zorich_Z(shear_phi(x))


def _H(x):
    return _Z(shear_phi(x))


def map_H_branch(x, s):
    return zorich_Z_branch(shear_phi(x), s)


def log_abs_H(x):
    return log_abs_Z(shear_phi(x))


def ramp(x3, L):
    return np.clip(np.asarray(x3, dtype=float) / L, 0.0, 1.0)


def _G(x, params):
    lam = ramp(x[..., 2], params.L)
    return x + lam[..., None] * _Z(x)


def map_G(x, params=None):
    params = params or MapParams()
    x = _as_points(x)
    _check_finite_exp(x[..., 2], "G")
    return _G(x, params)


def log_abs_G(y, params=None):
    """log |G(y)|, finite even when G(y) itself overflows."""
    params = params or MapParams()
    y = _as_points(y)
    out = np.empty(y.shape[:-1])
    small = y[..., 2] < 600.0
    if np.any(small):
        out[small] = _lognorm(_G(y[small], params))
    big = ~small
    if np.any(big):
        yb = y[big]
        face = _face(yb)
        lz = yb[..., 2] + _lognorm(face)
        unit = face / np.linalg.norm(face, axis=-1, keepdims=True)
        # lam == 1 here since 600 > L
        rel = yb * np.exp(-lz)[..., None]
        out[big] = lz + _lognorm(unit + rel)
    return out


def map_f(x, net, params=None):
    params = params or MapParams()
    x = _as_points(x)
    hx = map_H(x)
    inside = net.contains_point(x)
    out = hx.copy()
    if np.ndim(inside) == 0:
        return map_G(hx, params) if inside else out
    if np.any(inside):
        out[inside] = map_G(hx[inside], params)
    return out


def log_abs_f(x, net, params=None):
    params = params or MapParams()
    x = _as_points(x)
    y = shear_phi(x)
    inside = np.asarray(net.contains_point(x))
    out = np.asarray(log_abs_Z(y), dtype=float).copy()
    if np.any(inside):
        yi = y[inside]
        _check_finite_exp(yi[..., 2], "f")
        out[inside] = log_abs_G(_Z(yi), params)
    return out


def _parity_sign(s):
    return -1.0 if (int(s[0]) + int(s[1])) % 2 else 1.0


def inverse_branch_Z(y, s):
    """The branch of Z^{-1} with values in the beam T(s)."""
    y = _as_points(y)
    s1, s2 = int(s[0]), int(s[1])
    sigma = _parity_sign(s)
    y3 = sigma * y[..., 2]
    if np.any(y3 < 0):
        raise DomainError(f"point lies in the wrong half-space for beam {s}")
    a = np.maximum(np.abs(y[..., 0]), np.abs(y[..., 1])) + y3
    if np.any(a <= 0):
        raise DomainError("Z never takes the value 0")
    x1 = 2 * s1 + (-1.0) ** s1 * (y[..., 0] / a)
    x2 = 2 * s2 + (-1.0) ** s2 * (y[..., 1] / a)
    return np.stack([x1, x2, np.log(a)], axis=-1)


def inverse_branch_H(y, s):
    return shear_phi(inverse_branch_Z(y, s), "inverse")


def inverse_branch_G(y, s, params=None, tol=1e-14, max_iter=60):
    """Solve G(x) = y for x in T(s) with x3 >= L by x <- Z_s^{-1}(y - x)."""
    params = params or MapParams()
    y = _as_points(y)
    x = inverse_branch_Z(y, s)
    for _ in range(max_iter):
        x_new = inverse_branch_Z(y - x, s)
        step = np.max(np.abs(x_new - x))
        x = x_new
        if step <= tol * max(1.0, float(np.max(np.abs(x)))):
            break
    else:
        raise ConvergenceError(f"G inverse on beam {s} did not converge in {max_iter} steps")
    if np.any(x[..., 2] < params.L):
        raise DomainError("point is below the range where G is x + Z(x)")
    return x


@dataclass(frozen=True)
class JacobianSample:
    opnorm: float
    minnorm: float
    jacdet: float
    KO_est: float
    KI_est: float
    matrix: np.ndarray = field(repr=False, compare=False, default=None)

    @property
    def ratio(self):
        return self.opnorm / self.minnorm


def _crease_distance(tag, x, params):
    """Distance from x to the set where the map fails to be differentiable."""
    x = np.asarray(x, dtype=float)
    if tag == "phi":
        return min(abs(x[0]), abs(x[1]))
    y = shear_phi(x) if tag in ("H", "f") else x
    d = float(beam_boundary_distance(y))
    f1, f2 = float(fold(y[0]).value), float(fold(y[1]).value)
    d = min(d, abs(abs(f1) - abs(f2)) / 2.0)
    if tag in ("H", "f"):
        d = min(d, abs(x[0]), abs(x[1]))
    if tag == "G":
        d = min(d, abs(x[2]), abs(x[2] - params.L))
    return d


def resolve_map(tag, net=None, params=None):
    params = params or MapParams()
    table = {
        "Z": zorich_Z,
        "H": map_H,
        "phi": shear_phi,
        "G": lambda x: map_G(x, params),
    }
    if tag == "f":
        if net is None:
            raise DomainError("map f needs a net")
        return lambda x: map_f(x, net, params)
    if callable(tag):
        return tag
    try:
        return table[tag]
    except KeyError:
        raise DomainError(f"unknown map tag {tag!r}") from None


def dilatation_sample(F, x, step=None, net=None, params=None):
    """Central-difference Jacobian of map ``F`` at ``x`` and its distortion."""
    params = params or MapParams()
    x = np.asarray(x, dtype=float)
    if step is None:
        step = 1e-6 * max(1.0, float(np.linalg.norm(x)))
    if isinstance(F, str) and _crease_distance(F, x, params) < max(1e-8, 2.0 * step):
        raise DomainError("sample point too close to a crease of the map")
    func = resolve_map(F, net, params)
    offsets = step * np.eye(3)
    fwd = func(x[None, :] + offsets)
    bwd = func(x[None, :] - offsets)
    jac = ((fwd - bwd) / (2.0 * step)).T
    sv = np.linalg.svd(jac, compute_uv=False)
    det = float(np.linalg.det(jac))
    op, mn = float(sv[0]), float(sv[-1])
    if abs(det) < 1e-12 * op ** 3:
        raise DegenerateSampleError(f"Jacobian numerically singular at {x}")
    return JacobianSample(op, mn, det, op ** 3 / abs(det), abs(det) / mn ** 3, jac)
