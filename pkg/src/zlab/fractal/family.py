"""Anchors p(s, k) and the families U_F(t) of level cells inside Q(t)."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from zlab.errors import DomainError, OutOfRangeError
from zlab.fractal.shapes import cell_offsets, max_pairwise, sphere_points
from zlab.maps import MapParams


def eta(r):
    """log log r, defined for r > e."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= math.e):
        raise DomainError("eta needs r > e")
    out = np.log(np.log(r))
    return float(out) if out.ndim == 0 else out


def k_eta(k):
    """k * eta(k) for integer k >= 3 (array friendly)."""
    k = np.asarray(k, dtype=float)
    return k * np.log(np.log(k))


def k_eta_inverse(v):
    """Real solution k >= 3 of k log log k = v, for v >= k_eta(3)."""
    v = np.asarray(v, dtype=float)
    k = np.maximum(v / np.log(np.log(np.maximum(v, 16.0))), 3.0)
    for _ in range(60):
        g = k * np.log(np.log(k)) - v
        dg = np.log(np.log(k)) + 1.0 / np.log(k)
        step = g / dg
        k = np.maximum(k - step, 3.0)
        if np.all(np.abs(step) <= 1e-12 * k):
            break
    return k


def k_window(lo, hi):
    """Integer range [k_lo, k_hi] of k >= 3 with lo <= k eta(k) <= hi (empty if k_lo > k_hi)."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    kmin = k_eta(3.0)
    k_lo = np.ceil(k_eta_inverse(np.maximum(lo, kmin))).astype(np.int64)
    k_hi = np.floor(k_eta_inverse(np.maximum(hi, kmin))).astype(np.int64)
    # correct the Newton rounding against the exact inequality
    k_lo = np.where((k_lo > 3) & (k_eta(np.maximum(k_lo - 1, 3)) >= lo), k_lo - 1, k_lo)
    k_lo = np.where(k_eta(k_lo) < lo, k_lo + 1, k_lo)
    k_hi = np.where(k_eta(k_hi + 1) <= hi, k_hi + 1, k_hi)
    k_hi = np.where(k_eta(k_hi) > hi, k_hi - 1, k_hi)
    k_hi = np.where(hi < kmin, 2, k_hi)
    return k_lo, k_hi


@dataclass(frozen=True)
class Anchor:
    """Beam index s, level k and the map (H or G) whose branch defines the cell."""

    s: tuple
    k: int
    map_tag: str

    def __post_init__(self):
        if self.k < 2:
            raise DomainError("anchor level k must be >= 2")
        if self.map_tag not in ("H", "G"):
            raise DomainError(f"map_tag must be H or G, not {self.map_tag!r}")
        object.__setattr__(self, "s", (int(self.s[0]), int(self.s[1])))
        object.__setattr__(self, "k", int(self.k))

    @property
    def l1(self):
        return abs(self.s[0]) + abs(self.s[1])

    def to_list(self):
        return [self.s[0], self.s[1], self.k, self.map_tag]


def anchor_p(a):
    """p(s, k) = (2 s1, 2 s2, k eta(k))."""
    return np.array([2.0 * a.s[0], 2.0 * a.s[1], float(k_eta(a.k))])


def _guard(a):
    ke = float(k_eta(a.k))
    if not ke > 2 * a.l1:
        raise DomainError(f"anchor {a} rejected: k eta(k) = {ke} <= 2|s|_1")
    return ke


def anchor_image_log(a, params=None):
    """log |F(p(s, k))_3|; the other two coordinates are 0 (H) or 2s (G)."""
    params = params or MapParams()
    ke = _guard(a)
    if a.map_tag == "H":
        return ke - 2 * a.l1
    if ke < params.L:
        raise DomainError("G closed form needs k eta(k) >= L")
    return ke + math.log1p(ke * math.exp(-ke))


def anchor_image(a, params=None):
    """F(p(s, k)) in closed form; raises when it leaves double range.

    For H the third coordinate carries the sign (-1)^(s1 + s2), positive on
    every beam of a net.
    """
    lg = anchor_image_log(a, params)
    if lg > 709.0:
        raise DomainError("anchor image overflows double precision; use anchor_image_log")
    if a.map_tag == "H":
        sign = -1.0 if (a.s[0] + a.s[1]) % 2 else 1.0
        return np.array([0.0, 0.0, sign * math.exp(lg)])
    return np.array([2.0 * a.s[0], 2.0 * a.s[1], math.exp(lg)])


@lru_cache(maxsize=4)
def c2_estimate(n_probe=2048):
    """Largest cell diameter over all sign patterns of the level cells.

    The offsets depend on s only through the parities of s1, s2 and the
    signs (or vanishing) of s1, s2, so a handful of beams covers every case.
    """
    omega = sphere_points(n_probe)
    beams = [(a, b) for a in (-3, -2, 0, 2, 3) for b in (-3, -2, 0, 2, 3)]
    diams = [max_pairwise(cell_offsets(tag, s, omega)) for s in beams for tag in ("H", "G")]
    return float(max(diams))


@dataclass(frozen=True)
class FamilyTable:
    """U_F(t) grouped by beam: for beam i the levels k_lo[i]..k_hi[i]."""

    t: float
    map_tag: str
    beams: np.ndarray
    k_lo: np.ndarray
    k_hi: np.ndarray

    @property
    def counts(self):
        return np.maximum(self.k_hi - self.k_lo + 1, 0)

    @property
    def total(self):
        return int(self.counts.sum())

    def anchor_at(self, index):
        """The index-th anchor in (s lex, then k) order."""
        cum = np.cumsum(self.counts)
        i = int(np.searchsorted(cum, index, side="right"))
        before = int(cum[i - 1]) if i > 0 else 0
        s = self.beams[i]
        return Anchor((int(s[0]), int(s[1])), int(self.k_lo[i] + index - before), self.map_tag)

    def anchors(self):
        out = []
        for s, lo, hi in zip(self.beams, self.k_lo, self.k_hi):
            out.extend(Anchor((int(s[0]), int(s[1])), k, self.map_tag) for k in range(int(lo), int(hi) + 1))
        return out

    def points(self):
        """All anchor points p(s, k) as an (n, 3) array."""
        cnt = self.counts
        if self.total == 0:
            return np.zeros((0, 3))
        ks = np.concatenate([np.arange(lo, hi + 1) for lo, hi in zip(self.k_lo, self.k_hi) if hi >= lo])
        ss = np.repeat(self.beams, cnt, axis=0)
        return np.column_stack([2.0 * ss[:, 0], 2.0 * ss[:, 1], k_eta(ks)])


def family_table(map_tag, t, net, c2=None, region="box"):
    """Beams and level windows of U_F(t) (anchor-with-margin test).

    ``region="box"`` keeps p(s, k) in Q(t) shrunk by C2 on every face and
    inside K(t) by C2.  ``region="disc"`` additionally restricts the beam
    centres 2s to the disc of radius t/31 about (t/5, t/5).
    For the singleton net S = {(0, 0)} the family is the axis column with
    the same level window, since Q(t) cannot meet that beam.
    """
    if map_tag not in ("H", "G"):
        raise DomainError(f"map_tag must be H or G, not {map_tag!r}")
    c2 = c2_estimate() if c2 is None else c2
    t = float(t)
    if t <= 24.0 * c2:
        raise DomainError(f"t = {t} too small for the margin C2 = {c2}")
    lo3, hi3 = 0.75 * t + c2, 1.25 * t - c2
    if net.is_singleton:
        beams = np.zeros((1, 2), dtype=np.int64)
        k_lo, k_hi = k_window(lo3, hi3)
        return FamilyTable(t, map_tag, beams, np.atleast_1d(k_lo), np.atleast_1d(k_hi))
    s_hi = (t / 4.0 - c2) / 2.0
    if math.sqrt(2.0) * s_hi > net.certified_radius:
        raise OutOfRangeError(f"net certified radius {net.certified_radius} too small for t = {t}")
    s_lo = (t / 6.0 + c2) / 2.0
    P = net.points
    m = (P[:, 0] >= s_lo) & (P[:, 0] <= s_hi) & (P[:, 1] >= s_lo) & (P[:, 1] <= s_hi)
    if region == "disc":
        d = np.hypot(2.0 * P[:, 0] - t / 5.0, 2.0 * P[:, 1] - t / 5.0)
        m &= d <= t / 31.0
    elif region != "box":
        raise DomainError(f"unknown region {region!r}")
    beams = P[m]
    order = np.lexsort((beams[:, 1], beams[:, 0]))
    beams = beams[order]
    r2 = 4.0 * (beams[:, 0].astype(float) ** 2 + beams[:, 1].astype(float) ** 2)
    half = np.sqrt(np.maximum((t / 2.0 - c2) ** 2 - r2, 0.0))
    lo = np.maximum(lo3, t - half)
    hi = np.minimum(hi3, t + half)
    # guard k eta(k) >= 3|s|_1 holds automatically inside Q(t); enforce anyway
    lo = np.maximum(lo, 3.0 * (np.abs(beams[:, 0]) + np.abs(beams[:, 1])))
    k_lo, k_hi = k_window(lo, hi)
    return FamilyTable(t, map_tag, beams, np.atleast_1d(k_lo), np.atleast_1d(k_hi))


def enumerate_U(map_tag, t, net, params=None, count_only=False, c2=None, region="box"):
    """Anchors of U_F(t) in (s lex, then k) order, or just their number."""
    table = family_table(map_tag, t, net, c2, region)
    return table.total if count_only else table.anchors()


def u_count_slope(net, t_values=None, c2=None, region="box"):
    """Slope of log(count * eta(t)) against log t over the nonzero counts."""
    from scipy import stats

    t_values = np.geomspace(300.0, 1e4, 25) if t_values is None else np.asarray(t_values, dtype=float)
    counts = np.array([enumerate_U("H", t, net, count_only=True, c2=c2, region=region) for t in t_values])
    good = counts > 0
    out = {"t": t_values.tolist(), "counts": counts.tolist(), "n_used": int(good.sum())}
    if good.sum() < 2:
        out.update(slope=None, stderr=None, status="insufficient scale range")
        return out
    x = np.log(t_values[good])
    y = np.log(counts[good] * eta(t_values[good]))
    fit = stats.linregress(x, y)
    out.update(slope=float(fit.slope), stderr=float(fit.stderr), status="ok")
    return out
