"""Scale-free shapes of the level cells P_H(s, k) and P_G(s, k).

Both cells are pullbacks of a ball K(q) = B((0, 0, q), q/2) under a branch
of H or G.  Writing y = q * yhat with yhat in K(1), the branch of Z^{-1}
is homogeneous: its first two coordinates depend on yhat only and its third
is log q + log a(yhat).  The offsets delta = x - p(s, k) of cell points from
their anchor are therefore O(1) functions of yhat, computed here without
ever forming q itself, so that cells at scales like e^900 are handled in
double precision.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np



def sphere_points(n, seed=0):
    """Fibonacci lattice on the unit sphere, rotated by a seeded angle."""
    i = np.arange(n) + 0.5
    z = 1.0 - 2.0 * i / n
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    rot = np.random.default_rng(seed).uniform(0, 2 * np.pi)
    phi = i * math.pi * (3.0 - math.sqrt(5.0)) + rot
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=-1)


def ball_points(n, seed=0):
    rng = np.random.default_rng(seed)
    v = rng.normal(size=(n, 3))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return v * rng.random(n)[:, None] ** (1.0 / 3.0)


def unit_ball_image(omega):
    """Points of K(1) from points of the unit ball."""
    return np.array([0.0, 0.0, 1.0]) + 0.5 * np.asarray(omega)


def _a(yhat):
    return np.maximum(np.abs(yhat[..., 0]), np.abs(yhat[..., 1])) + yhat[..., 2]


def jac_Lambda(yhat):
    """Jacobian of y -> (y1/a, y2/a, log a), a = max(|y1|, |y2|) + y3.

    This is the beam-(0,0) branch of Z^{-1}; other beams differ by a sign
    on the first two rows.  Homogeneous of degree -1 in y.
    """
    yhat = np.asarray(yhat, dtype=float)
    a = _a(yhat)
    first = np.abs(yhat[..., 0]) >= np.abs(yhat[..., 1])
    da = np.zeros(yhat.shape)
    da[..., 0] = np.where(first, np.sign(yhat[..., 0]), 0.0)
    da[..., 1] = np.where(first, 0.0, np.sign(yhat[..., 1]))
    da[..., 2] = 1.0
    J = np.zeros(yhat.shape[:-1] + (3, 3))
    for i in range(2):
        J[..., i, :] = -yhat[..., i, None] * da / (a * a)[..., None]
        J[..., i, i] += 1.0 / a
    J[..., 2, :] = da / a[..., None]
    return J


def _sign(n):
    """(-1)^n for an arbitrary Python integer."""
    return -1.0 if int(n) % 2 else 1.0


def reflection(s):
    return np.diag([_sign(s[0]), _sign(s[1]), 1.0])


def shear_inverse_jacobian(x):
    """Derivative of phi^{-1}(x) = (x1, x2, x3 + |x1| + |x2|) away from creases."""
    x = np.asarray(x, dtype=float)
    J = np.broadcast_to(np.eye(3), x.shape[:-1] + (3, 3)).copy()
    J[..., 2, 0] = np.sign(x[..., 0])
    J[..., 2, 1] = np.sign(x[..., 1])
    return J


def cell_offsets(tag, s, omega, base3=0.0, p_over_q=None, inv_q=0.0):
    """Offsets x - p(s, k) of the pullback of the points q*yhat(omega).

    For H the offsets depend on s only through parities and signs.  For G,
    ``base3`` is log q - k eta(k), ``p_over_q`` the anchor divided by q and
    ``inv_q`` = 1/q; both may be left at their defaults once they are below
    double resolution.  The G^{-1} fixed point x = Lambda_s(y - x) is solved
    in the variables scaled by 1/q.
    """
    yhat = unit_ball_image(omega)
    s1, s2 = int(s[0]), int(s[1])
    r1, r2 = _sign(s1), _sign(s2)
    if tag == "H":
        a = _a(yhat)
        du1 = r1 * yhat[..., 0] / a
        du2 = r2 * yhat[..., 1] / a
        # |2 s_j + du_j| - 2|s_j|, exact for |du_j| < 1
        c1 = np.abs(du1) if s1 == 0 else (1.0 if s1 > 0 else -1.0) * du1
        c2 = np.abs(du2) if s2 == 0 else (1.0 if s2 > 0 else -1.0) * du2
        # log q + 2|s|_1 - k eta vanishes identically for H
        return np.stack([du1, du2, np.log(a) + c1 + c2], axis=-1)
    if tag != "G":
        raise ValueError(f"unknown cell tag {tag!r}")
    shift = np.zeros(3) if p_over_q is None else np.asarray(p_over_q, dtype=float)
    delta = np.zeros(yhat.shape)
    for _ in range(12):
        yr = yhat - shift - delta * inv_q
        a = _a(yr)
        new = np.stack([r1 * yr[..., 0] / a, r2 * yr[..., 1] / a, base3 + np.log(a)], axis=-1)
        done = np.max(np.abs(new - delta)) < 1e-15
        delta = new
        if done:
            break
    return delta


def cell_jacobian_inverse_det(tag, s, omega):
    """|det D F^{-1}| at q*yhat(omega), times q^3 (scale-free)."""
    yhat = unit_ball_image(omega)
    return np.abs(np.linalg.det(jac_Lambda(yhat)))


def max_pairwise(points):
    pts = np.asarray(points)
    if len(pts) < 2:
        return 0.0
    from scipy.spatial import ConvexHull
    from scipy.spatial.distance import cdist

    try:
        hull = pts[ConvexHull(pts).vertices]
    except Exception:
        hull = pts
    return float(cdist(hull, hull).max())


@lru_cache(maxsize=8)
def unit_cell_measure(n_probe=4096, seed=1):
    """meas of the pullback of K(1) under the branch of Z^{-1} (Monte Carlo)."""
    omega = ball_points(n_probe, seed)
    vol = 4.0 / 3.0 * math.pi * 0.5 ** 3
    return float(vol * np.mean(cell_jacobian_inverse_det("H", (0, 0), omega)))
