"""Greedy separated nets of even-parity lattice points.

The net S is built by scanning even-parity points s of Z^2 in order of
increasing |s|^2 (ties broken lexicographically) and accepting s whenever
|s - s'| >= |s|^beta + |s'|^beta holds for every previously accepted s'.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numba
import numpy as np
from scipy import stats
from scipy.spatial import cKDTree

from zlab.errors import ConfigError, OutOfRangeError, VerificationError

TIE_BREAK = "norm2-lex"
# relative slack on the squared separation inequality
SEP_SLACK = 1e-12
# relative slack on the covering inequality
COVER_SLACK = 1e-9


@dataclass(frozen=True)
class NetConfig:
    rho: float
    r_max: float = 1e4
    tie_break: str = TIE_BREAK

    def __post_init__(self):
        if not 1.0 <= self.rho < 3.0:
            raise ConfigError(f"rho must lie in [1, 3), got {self.rho}")
        if self.r_max < 10:
            raise ConfigError(f"r_max must be at least 10, got {self.r_max}")
        if self.tie_break != TIE_BREAK:
            raise ConfigError(f"unsupported tie-break rule {self.tie_break!r}")

    @property
    def beta(self):
        return (3.0 - self.rho) / 2.0

    @classmethod
    def from_beta(cls, beta, r_max=1e4):
        return cls(rho=3.0 - 2.0 * beta, r_max=r_max)


@numba.njit(cache=True)
def _band_candidates(r0sq, r1sq, rmax_sq):
    """Even-parity lattice points with r0sq <= |s|^2 < r1sq and |s|^2 <= rmax_sq."""
    hi = int(math.sqrt(r1sq)) + 1
    cap = 16
    n = 0
    out1 = np.empty(cap, np.int64)
    out2 = np.empty(cap, np.int64)
    for a in range(-hi, hi + 1):
        rest_hi = r1sq - 1 - a * a
        if rest_hi < 0:
            continue
        if rest_hi > rmax_sq - a * a:
            rest_hi = rmax_sq - a * a
            if rest_hi < 0:
                continue
        bmax = int(math.sqrt(rest_hi))
        while (bmax + 1) * (bmax + 1) <= rest_hi:
            bmax += 1
        while bmax * bmax > rest_hi:
            bmax -= 1
        rest_lo = r0sq - a * a
        if rest_lo <= 0:
            bmin = 0
        else:
            bmin = int(math.sqrt(rest_lo))
            while bmin * bmin < rest_lo:
                bmin += 1
            while bmin > 0 and (bmin - 1) * (bmin - 1) >= rest_lo:
                bmin -= 1
        for b in range(bmin, bmax + 1):
            for sgn in (1, -1):
                if b == 0 and sgn == -1:
                    continue
                bb = sgn * b
                if (a + bb) % 2 != 0:
                    continue
                if n == cap:
                    cap *= 2
                    t1 = np.empty(cap, np.int64)
                    t2 = np.empty(cap, np.int64)
                    t1[:n] = out1[:n]
                    t2[:n] = out2[:n]
                    out1, out2 = t1, t2
                out1[n] = a
                out2[n] = bb
                n += 1
    return out1[:n], out2[:n]


@numba.njit(cache=True)
def _greedy_scan(c1, c2, beta, cell, off, ncell, head, nxt, p1, p2, pw, npts, amax):
    """Run the greedy acceptance over sorted candidates; returns (npts, amax)."""
    for i in range(c1.shape[0]):
        s1 = c1[i]
        s2 = c2[i]
        nsq = s1 * s1 + s2 * s2
        a = nsq ** (0.5 * beta)
        reach = a + amax
        gx = (s1 + off) // cell
        gy = (s2 + off) // cell
        span = int(reach // cell) + 1
        ok = True
        for cx in range(max(gx - span, 0), min(gx + span, ncell - 1) + 1):
            if not ok:
                break
            for cy in range(max(gy - span, 0), min(gy + span, ncell - 1) + 1):
                j = head[cx, cy]
                while j >= 0:
                    d1 = s1 - p1[j]
                    d2 = s2 - p2[j]
                    dsq = d1 * d1 + d2 * d2
                    rhs = a + pw[j]
                    if dsq < rhs * rhs * (1.0 - 1e-12):
                        ok = False
                        break
                    j = nxt[j]
                if not ok:
                    break
        if ok:
            p1[npts] = s1
            p2[npts] = s2
            pw[npts] = a
            nxt[npts] = head[gx, gy]
            head[gx, gy] = npts
            npts += 1
            if a > amax:
                amax = a
    return npts, amax


def _greedy_points(beta, r_max):
    rmax_int = int(math.floor(r_max))
    rmax_sq = int(math.floor(r_max * r_max))
    cell = max(2, int(math.ceil(2.0 * r_max ** beta)), int(math.ceil(2.0 * r_max / 2000)))
    off = rmax_int + cell
    ncell = (2 * off) // cell + 2
    head = np.full((ncell, ncell), -1, dtype=np.int64)
    cap = 1 << 16
    p1 = np.empty(cap, np.int64)
    p2 = np.empty(cap, np.int64)
    pw = np.empty(cap, np.float64)
    nxt = np.empty(cap, np.int64)
    npts, amax = 0, 0.0
    r0 = 0
    while r0 <= rmax_int:
        # about 1e6 even-parity candidates per band
        r1 = max(r0 + 4, int(math.ceil(math.sqrt(r0 * r0 + 2e6 / math.pi))))
        r1 = min(r1, rmax_int + 1)
        c1, c2 = _band_candidates(r0 * r0, r1 * r1, rmax_sq)
        order = np.lexsort((c2, c1, c1 * c1 + c2 * c2))
        c1, c2 = c1[order], c2[order]
        if npts + c1.shape[0] > cap:
            cap = max(2 * cap, npts + c1.shape[0])
            p1, p2, pw, nxt = (np.resize(a, cap) for a in (p1, p2, pw, nxt))
        npts, amax = _greedy_scan(c1, c2, beta, cell, off, ncell, head, nxt, p1, p2, pw, npts, amax)
        r0 = r1
    return np.stack([p1[:npts], p2[:npts]], axis=1)


@dataclass(frozen=True, eq=False)
class Net:
    """An immutable net: config plus the ordered list of accepted points."""

    config: NetConfig
    points: np.ndarray = field(repr=False)

    def __post_init__(self):
        pts = np.ascontiguousarray(self.points, dtype=np.int64).reshape(-1, 2)
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def beta(self):
        return self.config.beta

    @property
    def rho(self):
        return self.config.rho

    def __len__(self):
        return self.points.shape[0]

    @property
    def is_singleton(self):
        return self.config.rho == 1.0

    @property
    def certified_radius(self):
        """Radius within which membership and covering are fully determined."""
        if self.is_singleton:
            return math.inf
        return self.config.r_max - (2.0 * self.config.r_max ** self.beta + 2.0)

    @cached_property
    def tree(self):
        return cKDTree(self.points.astype(float))

    @cached_property
    def _keys(self):
        return np.sort(_encode(self.points[:, 0], self.points[:, 1]))

    @cached_property
    def norms_beta(self):
        return np.hypot(self.points[:, 0], self.points[:, 1]) ** self.beta

    def contains_index(self, s):
        s = np.asarray(s, dtype=np.int64)
        keys = _encode(s[..., 0], s[..., 1])
        pos = np.searchsorted(self._keys, keys)
        pos = np.minimum(pos, len(self._keys) - 1)
        return self._keys[pos] == keys

    def contains_point(self, x):
        """Membership of x in the closed union T of beams T(s), s in S."""
        x = np.asarray(x, dtype=float)
        lo = np.ceil((x[..., :2] - 1.0) / 2.0).astype(np.int64)
        hi = np.floor((x[..., :2] + 1.0) / 2.0).astype(np.int64)
        out = np.zeros(x.shape[:-1], dtype=bool)
        for a in (lo[..., 0], hi[..., 0]):
            for b in (lo[..., 1], hi[..., 1]):
                out |= self.contains_index(np.stack([a, b], axis=-1))
        return out

    def beam_in_net(self, x):
        """Index of a beam of S containing x, or None."""
        x = np.asarray(x, dtype=float)
        for a in (math.ceil((x[0] - 1) / 2), math.floor((x[0] + 1) / 2)):
            for b in (math.ceil((x[1] - 1) / 2), math.floor((x[1] + 1) / 2)):
                if bool(self.contains_index(np.array([a, b]))):
                    return (int(a), int(b))
        return None


def _encode(a, b):
    return (np.asarray(a, dtype=np.int64) << 32) + (np.asarray(b, dtype=np.int64) + (1 << 31))


def build_net(config):
    """Greedy net for ``config``; rho = 1 gives the single point (0, 0)."""
    if config.rho == 1.0:
        return Net(config, np.zeros((1, 2), dtype=np.int64))
    return Net(config, _greedy_points(config.beta, config.r_max))


def nearest_cover(net, x):
    """A net point s with |x - s| <= |s|^beta + (|x| + 1)^beta + 1."""
    x = np.asarray(x, dtype=float)
    nx = float(np.hypot(x[0], x[1]))
    if nx > net.certified_radius:
        raise OutOfRangeError(f"|x| = {nx} exceeds certified radius {net.certified_radius}")
    k = min(16, len(net))
    dist, idx = net.tree.query(x, k=k)
    dist, idx = np.atleast_1d(dist), np.atleast_1d(idx)
    bound_x = (nx + 1.0) ** net.beta + 1.0
    for d, i in zip(dist, idx):
        if d <= (net.norms_beta[i] + bound_x) * (1.0 + COVER_SLACK):
            return (int(net.points[i, 0]), int(net.points[i, 1]))
    # nearest points all fail; look wider before declaring a violation
    cand = net.tree.query_ball_point(x, r=2.0 * (nx + 2.0 * net.config.r_max ** net.beta) ** net.beta + bound_x)
    for i in cand:
        d = math.hypot(x[0] - net.points[i, 0], x[1] - net.points[i, 1])
        if d <= (net.norms_beta[i] + bound_x) * (1.0 + COVER_SLACK):
            return (int(net.points[i, 0]), int(net.points[i, 1]))
    raise VerificationError(f"covering property fails at {x.tolist()}", witness=x.tolist())


def count_in_ball(net, center, r):
    """Number of net points in the open disc B(center, r)."""
    if r <= 0:
        return 0
    center = np.asarray(center, dtype=float)
    idx = net.tree.query_ball_point(center, r)
    if not idx:
        return 0
    p = net.points[idx].astype(float)
    d2 = (p[:, 0] - center[0]) ** 2 + (p[:, 1] - center[1]) ** 2
    return int(np.count_nonzero(d2 < r * r))


def count_in_balls(net, centers, radii):
    return np.array([count_in_ball(net, c, r) for c, r in zip(centers, radii)], dtype=np.int64)


def separation_violations(points, beta, limit=10):
    """Pairs violating |s - s'| >= |s|^beta + |s'|^beta, found with a KD-tree."""
    points = np.asarray(points, dtype=np.int64)
    if len(points) < 2:
        return []
    norms = np.hypot(points[:, 0], points[:, 1])
    pw = norms ** beta
    amax = float(pw.max())
    tree = cKDTree(points.astype(float))
    radii = pw + (norms + 2.0 * amax) ** beta + 1e-9
    out = []
    neighbours = tree.query_ball_point(points.astype(float), radii)
    for i, nb in enumerate(neighbours):
        nb = np.asarray(nb, dtype=np.int64)
        nb = nb[nb > i]
        if nb.size == 0:
            continue
        d = points[nb] - points[i]
        dsq = (d[:, 0] * d[:, 0] + d[:, 1] * d[:, 1]).astype(float)
        rhs = pw[i] + pw[nb]
        bad = nb[dsq < rhs * rhs * (1.0 - SEP_SLACK)]
        for j in bad:
            out.append((points[i].tolist(), points[j].tolist()))
            if len(out) >= limit:
                return out
    return out


@dataclass
class NetReport:
    rho: float
    beta: float
    count: int
    first_point_origin: bool
    parity_violations: list
    separation_violations: list
    covering_samples: int
    covering_violations: list
    cap_samples: int
    cap_max: int
    cap_violations: int
    sandwich_samples: int
    sandwich_min: float | None
    sandwich_max: float | None
    sandwich_ok: bool | None
    exponent: float | None
    exponent_stderr: float | None
    alpha0_fit: float | None

    @property
    def exact_ok(self):
        return (
            self.first_point_origin
            and not self.parity_violations
            and not self.separation_violations
            and not self.covering_violations
        )

    def raise_for_violations(self):
        if not self.first_point_origin:
            raise VerificationError("first net point is not the origin")
        for name in ("parity_violations", "separation_violations", "covering_violations"):
            bad = getattr(self, name)
            if bad:
                raise VerificationError(f"{name.replace('_', ' ')}: {bad[0]}", witness=bad[0])

    def to_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__} | {"exact_ok": self.exact_ok}


def fit_count_exponent(net, r_lo=1e2, r_hi=None, n_r=16):
    """Least-squares slope of log card(S cap B(0, r)) against log r."""
    r_hi = net.config.r_max if r_hi is None else r_hi
    rs = np.geomspace(r_lo, r_hi, n_r)
    counts = np.array([count_in_ball(net, (0.0, 0.0), r) for r in rs], dtype=float)
    fit = stats.linregress(np.log(rs), np.log(counts))
    return float(fit.slope), float(fit.stderr), float(math.exp(fit.intercept)), rs, counts


def verify_net(net, n_samples=10_000, rng_seed=0):
    """Exact separation/parity checks plus sampled covering, cap and sandwich checks."""
    rng = np.random.default_rng(rng_seed)
    pts = net.points
    beta = net.beta
    parity = [p.tolist() for p in pts[(pts[:, 0] + pts[:, 1]) % 2 != 0][:10]]
    origin = len(pts) > 0 and pts[0].tolist() == [0, 0]
    sep = [] if net.is_singleton else separation_violations(pts, beta)

    r_cov = min(net.certified_radius, net.config.r_max)
    rad = r_cov * np.sqrt(rng.random(n_samples))
    ang = 2 * math.pi * rng.random(n_samples)
    xs = np.stack([rad * np.cos(ang), rad * np.sin(ang)], axis=1)
    cover_bad = []
    for x in xs:
        try:
            nearest_cover(net, x)
        except VerificationError as exc:
            cover_bad.append(exc.witness)

    r_max = net.config.r_max
    # cap: r < 8|x|^beta with B(x, r) inside the constructed disc
    n_cap = min(n_samples, 1000)
    cap_counts = []
    for _ in range(n_cap):
        nx = rng.uniform(1.0, r_max / 2)
        r = rng.uniform(0.0, 8.0 * nx ** beta)
        if nx + r > r_max:
            continue
        a = rng.uniform(0, 2 * math.pi)
        cap_counts.append(count_in_ball(net, (nx * math.cos(a), nx * math.sin(a)), r))
    cap_counts = np.array(cap_counts, dtype=np.int64)

    # two-sided count: 8|x|^beta <= r <= |x|/2, |x| + r <= r_max
    ratios = []
    x_lo = 16.0 ** (1.0 / (1.0 - beta)) if beta < 1 else math.inf
    if x_lo < r_max / 1.5 and not net.is_singleton:
        for _ in range(min(n_samples, 500)):
            nx = rng.uniform(x_lo, r_max / 1.5)
            r_hi = min(nx / 2, r_max - nx)
            r_lo = 8.0 * nx ** beta
            if r_hi <= r_lo:
                continue
            r = rng.uniform(r_lo, r_hi)
            a = rng.uniform(0, 2 * math.pi)
            c = count_in_ball(net, (nx * math.cos(a), nx * math.sin(a)), r)
            ratios.append(c / (nx ** (-2 * beta) * r * r))
    ratios = np.array(ratios)

    if net.is_singleton:
        slope, stderr, alpha0 = 0.0, 0.0, 1.0
    else:
        slope, stderr, alpha0, _, _ = fit_count_exponent(net, r_hi=min(1e4, r_max))

    return NetReport(
        rho=net.rho,
        beta=beta,
        count=len(pts),
        first_point_origin=bool(origin),
        parity_violations=parity,
        separation_violations=sep,
        covering_samples=n_samples,
        covering_violations=cover_bad[:10],
        cap_samples=int(cap_counts.size),
        cap_max=int(cap_counts.max()) if cap_counts.size else 0,
        cap_violations=int(np.count_nonzero(cap_counts > 324)),
        sandwich_samples=int(ratios.size),
        sandwich_min=float(ratios.min()) if ratios.size else None,
        sandwich_max=float(ratios.max()) if ratios.size else None,
        sandwich_ok=bool(ratios.min() >= 1 / 64 * (1 - 1e-9) and ratios.max() <= 6 * (1 + 1e-9)) if ratios.size else None,
        exponent=slope,
        exponent_stderr=stderr,
        alpha0_fit=alpha0,
    )
