"""Orbits of the half-iterates h_m, maximum modulus, and a truncated
classifier for fast escape.

The half-iterates interleave the two factors of f: odd steps apply H and
even steps apply G, but only when the point two steps back lay in T, so
that h_{2n} = f^n.  Positions stay in double precision until the next map
would overflow.  Points on the x3-axis are then followed symbolically,
since H and G both map the positive axis to itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from zlab.errors import DomainError
from zlab.maps import (
    EXP_SAFE,
    MapParams,
    _face,
    _G,
    _H,
    _lognorm,
    log_abs_f,
    log_abs_G,
    log_abs_H,
    log_abs_Z,
)
from zlab.numerics import LogScalar, beam_of, in_omega, logscalar_cmp, tower_exp

CERTIFIED = "CertifiedFastEscaping"
BOUNDED = "BoundedSoFar"
LEFT = "LeftCertifiedRegion"
UNKNOWN = "Unknown"
VERDICTS = (CERTIFIED, BOUNDED, LEFT, UNKNOWN)


@dataclass(frozen=True)
class OrbitRecord:
    """State of h_m(x).  ``position`` is None once it leaves double range."""

    index: int
    position: tuple | None
    log_magnitude: LogScalar
    in_T: bool
    in_Omega: bool
    beam: tuple | None
    on_axis: bool = False

    def to_dict(self):
        return {
            "m": self.index,
            "position": None if self.position is None else list(self.position),
            "magnitude": [self.log_magnitude.height, self.log_magnitude.mantissa],
            "in_T": self.in_T,
            "in_Omega": self.in_Omega,
            "beam": None if self.beam is None else list(self.beam),
            "on_axis": self.on_axis,
        }


@dataclass(frozen=True)
class EscapeStatus:
    verdict: str
    m0: int | None
    evidence: list = field(repr=False)
    thresholds: dict = field(default_factory=dict)
    empirical: bool = True

    @property
    def certified(self):
        return self.verdict == CERTIFIED


def _in_net_beams(net, x):
    """Membership in T, restricted to where the net is fully determined."""
    x = np.asarray(x, dtype=float)
    r = np.hypot(x[..., 0], x[..., 1])
    ok = r + 2.0 <= net.certified_radius
    out = np.zeros(x.shape[:-1], dtype=bool)
    if np.ndim(ok) == 0:
        return bool(ok) and bool(net.contains_point(x))
    if np.any(ok):
        out[ok] = net.contains_point(x[ok])
    return out


def _magnitude(x):
    x = np.asarray(x, dtype=float)
    n = float(np.linalg.norm(x))
    if math.isfinite(n) and n < 700.0:
        return LogScalar.from_real(n)
    return LogScalar.from_log(float(_lognorm(x)))


def _record(m, x, net):
    x = np.asarray(x, dtype=float)
    inside = _in_net_beams(net, x)
    on_axis = bool(x[0] == 0.0 and x[1] == 0.0)
    return OrbitRecord(
        m, tuple(float(v) for v in x), _magnitude(x), inside, bool(in_omega(x)),
        beam_of(x) if np.all(np.abs(x[:2]) < 2**52) else None, on_axis,
    )


def _axis_G(z):
    """Height of G(0, 0, Z) for a positive-axis point of height ``z``."""
    if z.height == 0 and z.mantissa < EXP_SAFE:
        w = z.mantissa
        return LogScalar.from_log(w + math.log1p(w * math.exp(-w)))
    # w e^{-w} is below double resolution once w >= 708
    return z.exp()


def iterate_h(x, m_max, net, params=None):
    """Records of h_0(x), ..., h_{m_max}(x), truncated as described above."""
    params = params or MapParams()
    if m_max < 1:
        raise DomainError("iterate_h needs m_max >= 1")
    x = np.asarray(x, dtype=float)
    recs = [_record(0, x, net)]
    axis_ok = bool(net.contains_index(np.array([0, 0])))
    pos = x
    for m in range(1, m_max + 1):
        prev = recs[-1]
        if prev.position is None:
            if not (prev.on_axis and axis_ok):
                break
            z = prev.log_magnitude
            if m % 2:
                nz = z.exp()
            else:
                nz = _axis_G(z) if recs[m - 2].in_T else z
            recs.append(OrbitRecord(m, None, nz, True, True, (0, 0), True))
            continue
        if m % 2:
            e3 = pos[2] - abs(pos[0]) - abs(pos[1])
            if e3 > EXP_SAFE:
                recs.append(_overflow(m, pos, "H", net, params))
                continue
            pos = _H(pos)
        elif recs[m - 2].in_T:
            if pos[2] > EXP_SAFE:
                recs.append(_overflow(m, pos, "G", net, params))
                continue
            pos = _G(pos, params)
        if not np.all(np.isfinite(pos)):
            recs.append(OrbitRecord(m, None, LogScalar(0, 0.0), False, False, None))
            break
        recs.append(_record(m, pos, net))
    return recs


def _overflow(m, pos, tag, net, params):
    """First unrepresentable record; the magnitude is still available."""
    on_axis = pos[0] == 0.0 and pos[1] == 0.0
    if tag == "H":
        lg = float(log_abs_H(pos))
        positive = _face(pos - np.array([0, 0, abs(pos[0]) + abs(pos[1])]))[2] > 0
    else:
        lg = float(log_abs_G(pos, params))
        positive = _face(pos)[2] > 0
    # a positive-axis point of height w maps to height e^w: keep it exact
    mag = LogScalar(1, pos[2]) if on_axis and tag == "H" else LogScalar.from_log(lg)
    if on_axis and tag == "G":
        mag = _axis_G(LogScalar.from_real(pos[2]))
    return OrbitRecord(m, None, mag, bool(on_axis and positive), bool(on_axis and positive),
                       (0, 0) if on_axis else None, bool(on_axis and positive))


def _ge_tower(mag, R, n):
    return logscalar_cmp(mag, tower_exp(R, n), rtol=0.0) >= 0


def _ge_triple(cur, prev):
    if prev.height == 0 and prev.mantissa == 0.0:
        return True
    return logscalar_cmp(cur, prev.mul_real(3.0), rtol=0.0) >= 0


def _x3_at_least(rec, R):
    if rec.position is not None:
        return rec.position[2] >= R
    # symbolic records are on the positive axis: x3 = |h|
    return rec.on_axis and logscalar_cmp(rec.log_magnitude, LogScalar.from_real(R), rtol=0.0) >= 0


def _continuation_ok(rec, R, net):
    if rec.position is None:
        return rec.on_axis
    x1, x2, x3 = rec.position
    return bool(rec.in_T and x3 >= max(R, 2.0 * (abs(x1) + abs(x2))))


def _find_m0(recs, R, horizon, net):
    last = len(recs) - 1
    known = [r for r in recs if r.position is not None or r.on_axis]
    J = len(known) - 1
    truncated = J < horizon
    for m0 in range(0, J + 1, 2):
        ok = True
        for j in range(m0, J + 1):
            r = known[j]
            if not _x3_at_least(r, R) or not _ge_tower(r.log_magnitude, R, j - m0):
                ok = False
                break
            if j > m0 and not _ge_triple(r.log_magnitude, known[j - 1].log_magnitude):
                ok = False
                break
            if j % 2 == 0 and not r.in_T:
                ok = False
                break
        if ok and truncated and not _continuation_ok(known[J], R, net):
            ok = False
        if ok:
            return m0, J
    return None, J if last >= 0 else 0


def fast_escape_classify(x, R, horizon, net, params=None):
    """Empirical certificate that x lies in the fast escaping set."""
    params = params or MapParams()
    if R < params.R_cert:
        raise DomainError(f"R = {R} is below R_cert = {params.R_cert}")
    if horizon < 2:
        raise DomainError("horizon must be at least 2")
    recs = iterate_h(x, horizon, net, params)
    m0, J = _find_m0(recs, R, horizon, net)
    thresholds = {"R": R, "horizon": horizon, "certified_radius": net.certified_radius}
    if m0 is not None:
        return EscapeStatus(CERTIFIED, m0, recs, thresholds)
    known = recs[: J + 1]
    escaped = any(logscalar_cmp(r.log_magnitude, LogScalar.from_log(R), rtol=0.0) >= 0
                  for r in known[1:])
    if not escaped:
        return EscapeStatus(BOUNDED, None, recs, thresholds)
    if J < horizon:
        return EscapeStatus(UNKNOWN, None, recs, thresholds)
    return EscapeStatus(LEFT, None, recs, thresholds)


def loglog_final(status):
    """log log |h_J| for the last known record, NaN when |h_J| <= e."""
    recs = [r for r in status.evidence if r.position is not None or r.on_axis]
    mag = recs[-1].log_magnitude if recs else LogScalar(0, 0.0)
    if logscalar_cmp(mag, LogScalar.from_log(1.0), rtol=0.0) <= 0:
        return math.nan
    return mag.log().log_float()


def classify_many(points, R, horizon, net, params=None):
    """Classify each row of ``points``; results follow input order."""
    return [fast_escape_classify(p, R, horizon, net, params) for p in np.asarray(points, dtype=float)]


def sphere_sample(r, n_samples, rng_seed=0):
    """Fibonacci lattice on the sphere of radius r plus both poles."""
    n = max(int(n_samples) - 2, 1)
    i = np.arange(n) + 0.5
    z = 1.0 - 2.0 * i / n
    rr = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    rot = np.random.default_rng(rng_seed).uniform(0.0, 2.0 * math.pi)
    phi = i * math.pi * (3.0 - math.sqrt(5.0)) + rot
    pts = np.stack([rr * np.cos(phi), rr * np.sin(phi), z], axis=-1)
    poles = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, -1.0]])
    return r * np.concatenate([poles, pts])


def _log_abs(map_tag, pts, net, params):
    if map_tag == "Z":
        return log_abs_Z(pts)
    if map_tag == "H":
        return log_abs_H(pts)
    if map_tag == "G":
        return log_abs_G(pts, params)
    if map_tag == "f":
        if net is None:
            raise DomainError("map f needs a net")
        return log_abs_f(pts, net, params)
    raise DomainError(f"unknown map tag {map_tag!r}")


def max_modulus(map_tag, r, n_samples=10_000, rng_seed=0, net=None, params=None, region=None):
    """Lower estimate of max_{|x| = r} |F(x)| as a LogScalar.

    ``region="offOmega"`` restricts the sample to points outside Omega.
    """
    params = params or MapParams()
    if r <= 0:
        raise DomainError("max_modulus needs r > 0")
    if n_samples < 1000:
        raise DomainError("max_modulus needs at least 1000 samples")
    pts = sphere_sample(r, n_samples, rng_seed)
    if region == "offOmega":
        pts = pts[~in_omega(pts)]
    elif region is not None:
        raise DomainError(f"unknown sampling region {region!r}")
    if map_tag == "f" and r > EXP_SAFE:
        raise DomainError("max_modulus of f needs r <= 708")
    return LogScalar.from_log(float(np.max(_log_abs(map_tag, pts, net, params))))


@dataclass(frozen=True)
class GrowthRow:
    r: float
    log_M: float
    ratio: float | None
    bounded: bool


def growth_diagnostic(r_values, map_tag="f", n_samples=10_000, rng_seed=0, net=None,
                      params=None, region=None):
    """Table of loglog M(r) / loglog r; rows with M <= e are flagged bounded."""
    rows = []
    for r in r_values:
        if r <= math.e:
            raise DomainError("growth_diagnostic needs r > e")
        M = max_modulus(map_tag, r, n_samples, rng_seed, net, params, region)
        log_M = M.log_float() if M.to_float() > 0 else -math.inf
        if log_M <= 1.0:
            rows.append(GrowthRow(float(r), log_M, None, True))
            continue
        loglog_M = M.log().log_float()
        rows.append(GrowthRow(float(r), log_M, loglog_M / math.log(math.log(r)), False))
    return rows


def axis_orbit_magnitude(R, steps):
    """|h_steps(0, 0, R)| when (0, 0) is in S, exact in LogScalar form."""
    z = LogScalar.from_real(R)
    for m in range(1, steps + 1):
        z = z.exp() if m % 2 else _axis_G(z)
    return z


def sandwich_check(R, n_samples=10_000, rng_seed=0, net=None, params=None, slack=0.5):
    """Check exp^2(R) <= M(R, f) and log log M(R, f) <= 2R + slack.

    The n = 2 row compares exp^4(R) and exp^4(2R)/2 with the axis value of
    f^2, the extremal point of the sample.
    """
    params = params or MapParams()
    if R < params.R_cert:
        raise DomainError(f"R = {R} is below R_cert = {params.R_cert}")
    M = max_modulus("f", R, n_samples, rng_seed, net, params)
    lo = tower_exp(R, 2)
    loglog = M.log().log_float()
    axis2 = axis_orbit_magnitude(R, 4)
    upper2 = tower_exp(2 * R, 4).log().add_real(-math.log(2.0)).exp()
    return {
        "R": R,
        "M_est": [M.height, M.mantissa],
        "loglog_M": loglog,
        "lower_ok": logscalar_cmp(M, lo, rtol=1e-12) >= 0,
        "upper_ok": loglog <= 2 * R + slack,
        "lower_margin": loglog - R,
        "upper_margin": 2 * R + slack - loglog,
        "n2_axis": [axis2.height, axis2.mantissa],
        "n2_lower_ok": logscalar_cmp(axis2, tower_exp(R, 4), rtol=1e-12) >= 0,
        "n2_upper_ok": logscalar_cmp(axis2, upper2, rtol=0.0) <= 0,
    }


def scan_R_cert(net, params=None, r_values=None, n_samples=2000):
    """Smallest grid value from which M(r, f) > r holds along ``r_values``."""
    params = params or MapParams()
    r_values = list(r_values) if r_values is not None else [1.0 + 0.5 * i for i in range(40)]
    ok = [max_modulus("f", r, n_samples, 0, net, params).log_float() > math.log(r) for r in r_values]
    cert = None
    for i in range(len(r_values) - 1, -1, -1):
        if not ok[i]:
            break
        cert = r_values[i]
    return {"R_cert_scan": cert, "configured": params.R_cert,
            "consistent": cert is not None and cert <= params.R_cert}
