"""Grayscale slices of the escape classifier and of level-1 measure density."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from zlab.dynamics import CERTIFIED, fast_escape_classify
from zlab.errors import ConfigError
from zlab.maps import MapParams

AXES = {"x1": 0, "x2": 1, "x3": 2}


@dataclass(frozen=True)
class SliceSpec:
    """Axis-aligned plane ``x_axis = value`` with a window in the other two axes.

    The window is (u_lo, u_hi, v_lo, v_hi) in the remaining coordinates in
    increasing index order; u runs along image columns, v along rows with
    the largest v in the top row.  Pixels sample their centres.
    """

    axis: str
    value: float
    window: tuple
    width: int = 256
    height: int = 256
    horizon: int = 8
    R: float = 10.0

    def __post_init__(self):
        if self.axis not in AXES:
            raise ConfigError(f"plane axis must be one of x1, x2, x3, not {self.axis!r}")
        if self.width < 16 or self.height < 16:
            raise ConfigError("slice resolution must be at least 16 x 16")
        u0, u1, v0, v1 = (float(c) for c in self.window)
        if not (u1 > u0 and v1 > v0):
            raise ConfigError(f"degenerate slice window {self.window}")
        if self.horizon < 2:
            raise ConfigError("horizon must be at least 2")

    @classmethod
    def parse_plane(cls, text):
        """'x2=0' -> ('x2', 0.0)."""
        try:
            name, val = text.split("=")
            return name.strip(), float(val)
        except ValueError as exc:
            raise ConfigError(f"plane must look like 'x2=0', got {text!r}") from exc

    def pixel_points(self):
        """(height, width, 3) array of pixel-centre coordinates."""
        u0, u1, v0, v1 = (float(c) for c in self.window)
        us = u0 + (np.arange(self.width) + 0.5) * (u1 - u0) / self.width
        vs = v1 - (np.arange(self.height) + 0.5) * (v1 - v0) / self.height
        free = [i for i in range(3) if i != AXES[self.axis]]
        pts = np.empty((self.height, self.width, 3))
        pts[..., AXES[self.axis]] = self.value
        pts[..., free[0]] = us[None, :]
        pts[..., free[1]] = vs[:, None]
        return pts


def pixel_value(status, horizon):
    """255 at m0 = 0, decreasing with m0; 0 when not certified."""
    if status.verdict != CERTIFIED:
        return 0
    return 255 - (254 * status.m0) // horizon


def _row(args):
    row, R, horizon, net, params = args
    return [pixel_value(fast_escape_classify(p, R, horizon, net, params), horizon) for p in row]


def thread_count():
    try:
        n = int(os.environ.get("ZLAB_THREADS", "1"))
    except ValueError as exc:
        raise ConfigError("ZLAB_THREADS must be an integer") from exc
    return max(1, n)


def render_slice(spec, net, params=None, threads=None):
    """uint8 image of escape indices on the slice; identical for any thread count."""
    params = params or MapParams()
    pts = spec.pixel_points()
    jobs = [(pts[i], spec.R, spec.horizon, net, params) for i in range(spec.height)]
    threads = thread_count() if threads is None else threads
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as ex:
            rows = list(ex.map(_row, jobs))
    else:
        rows = [_row(j) for j in jobs]
    return np.array(rows, dtype=np.uint8)


def density_image(points, weights=None, size=128):
    """Log-density histogram of points projected on (x1, x2), scaled to 0..255."""
    pts = np.asarray(points, dtype=float)
    w = np.ones(len(pts)) if weights is None else np.asarray(weights, dtype=float)
    img = np.zeros((size, size), dtype=np.uint8)
    if len(pts) == 0:
        return img
    lo = pts[:, :2].min(axis=0)
    hi = pts[:, :2].max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    ij = np.minimum(((pts[:, :2] - lo) / span * size).astype(np.int64), size - 1)
    H = np.zeros((size, size))
    # row 0 at the top: largest x2
    np.add.at(H, (size - 1 - ij[:, 1], ij[:, 0]), w)
    occupied = H > 0
    L = np.zeros_like(H)
    L[occupied] = np.log(H[occupied])
    if occupied.any():
        lmin, lmax = L[occupied].min(), L[occupied].max()
        scale = (lmax - lmin) if lmax > lmin else 1.0
        img[occupied] = (1 + np.floor(254 * (L[occupied] - lmin) / scale)).astype(np.uint8)
    return img
