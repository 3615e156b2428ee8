"""The nested cell tree E_0 = {K(R0)}, E_1, E_2, ... and its measures.

Level-1 cells are the cells P_H(s, k) of U_H(R0), drawn from the net.
A cell V at level m >= 1 has h_m(V) = K(t_V) with t_V of size e^250 or
more, far beyond any constructible net, so its children use virtual
anchors: even-parity integer beams drawn uniformly in the admissible box,
with family sizes taken from the fitted net density.  Anchor chains are
exact to working precision (see :mod:`zlab.fractal.hp`); cell geometry is
the child's scale-free shape mapped through the derivative of h_m^{-1} at
the anchor, stored as a log-scale plus an O(1) frame matrix.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import mpmath as mp
import numpy as np
from scipy.optimize import minimize
from scipy.spatial import cKDTree
from scipy.special import logsumexp

from zlab.errors import ConfigError, ConvergenceError, DomainError, OutOfRangeError
from zlab.fractal import hp
from zlab.fractal.family import Anchor, c2_estimate, eta, family_table
from zlab.fractal.shapes import (
    _sign,
    cell_offsets,
    jac_Lambda,
    max_pairwise,
    reflection,
    shear_inverse_jacobian,
    sphere_points,
    unit_cell_measure,
)
from zlab.maps import MapParams
from zlab.net import count_in_ball
from zlab.numerics import LogScalar, logscalar_cmp

MAX_DEPTH = 2


@dataclass(frozen=True)
class TreeConfig:
    R0: float
    depth: int
    child_cap: int = 64
    seed: int = 0
    n_probe: int = 256
    region: str = "box"

    def __post_init__(self):
        if self.depth < 0:
            raise ConfigError("depth must be >= 0")
        if self.child_cap < 1:
            raise ConfigError("child_cap must be >= 1")
        if self.n_probe < 16:
            raise ConfigError("n_probe must be >= 16")


@dataclass(eq=False)
class CellNode:
    """A cell V of E_m with h_m(V) = K(t)."""

    level: int
    branch_word: tuple
    t: LogScalar
    anchor_preimage: np.ndarray
    log_scale: float
    frame: np.ndarray = field(repr=False)
    probes: np.ndarray = field(repr=False)
    log_diam: float
    log_meas: float
    virtual: bool = False
    orbit: tuple = field(default=(), repr=False)
    seed: int = 0
    children: list = field(default_factory=list, repr=False)
    log_family: float = math.nan
    family_exact: int | None = None
    measure: float = 0.0
    log_cell_measure: float = 0.0
    sterile: bool = False
    diagnostics: list = field(default_factory=list, repr=False)
    _u: list | None = field(default=None, repr=False)
    _log_t: object = field(default=None, repr=False)
    _dps: int = 30

    @property
    def t_parent(self):
        return self.t

    @property
    def diam_est(self):
        return math.exp(self.log_diam) if self.log_diam > -745 else 0.0

    @property
    def meas_est(self):
        return math.exp(self.log_meas) if self.log_meas > -745 else 0.0

    @property
    def anchor(self):
        return self.branch_word[-1] if self.branch_word else None


@dataclass(eq=False)
class Tree:
    root: CellNode
    config: TreeConfig
    c2: float
    density_alpha: float
    diagnostics: list = field(default_factory=list)

    def levels(self):
        out = [[self.root]]
        while True:
            nxt = [c for v in out[-1] for c in v.children]
            if not nxt:
                return out
            out.append(nxt)

    def nodes(self):
        return [v for lev in self.levels() for v in lev]


def node_seed(seed, word):
    text = f"{seed}|" + ";".join(f"{a.s[0]},{a.s[1]},{a.k},{a.map_tag}" for a in word)
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:8], "little")


def density_alpha(net):
    """Constant a in card(S cap B(0, r)) ~ a r^{2 - 2 beta}, fitted on the net."""
    if net.is_singleton:
        return 1.0
    r_hi = 0.9 * min(net.certified_radius, net.config.r_max)
    rs = np.geomspace(min(100.0, r_hi / 4), r_hi, 12)
    e = 2.0 - 2.0 * net.beta
    ratios = [count_in_ball(net, (0.0, 0.0), r) / r ** e for r in rs]
    return float(np.median(ratios))


def _logscalar_from_log(lt):
    """t as a LogScalar from an mpf value of log t."""
    if lt < 700:
        return LogScalar.from_log(float(lt))
    return LogScalar(2, float(mp.log(lt)))


def root_cell(R0, seed=0):
    R0 = float(R0)
    vol = 4.0 / 3.0 * math.pi * (R0 / 2.0) ** 3
    with mp.workdps(30):
        log_t = mp.log(R0)
    return CellNode(
        level=0, branch_word=(), t=LogScalar.from_real(R0),
        anchor_preimage=np.array([0.0, 0.0, R0]), log_scale=0.0, frame=np.eye(3),
        probes=np.zeros((0, 3)), log_diam=math.log(R0), log_meas=math.log(vol),
        seed=node_seed(seed, ()), measure=1.0, _log_t=log_t,
    )


def _branch_derivative(tag, s, p, L):
    """D(F^{-1})(p) for the branch into T(s) as (log scale, unit-norm matrix)."""
    if tag == "H":
        n = hp.norm(p)
        phat = np.array([float(c / n) for c in p])
        x = hp.Lambda(p, s)
        sx = np.array([float(mp.sign(x[0])), float(mp.sign(x[1])), 0.0])
        M = shear_inverse_jacobian(sx) @ reflection(s) @ jac_Lambda(phat)
        ls = -float(mp.log(n))
    else:
        x = hp.G_inv(p, s, L)
        s1, s2 = int(s[0]), int(s[1])
        r1, r2 = _sign(s1), _sign(s2)
        u1 = float(r1 * (x[0] - 2 * s1))
        u2 = float(r2 * (x[1] - 2 * s2))
        sigma = _sign(s1 + s2)
        A = np.array([[r1, 0.0, u1], [0.0, r2, u2], [0.0, 0.0, sigma * (1 - max(abs(u1), abs(u2)))]])
        if abs(u1) >= abs(u2):
            A[2, 0] = -sigma * math.copysign(1.0, u1) * r1
        else:
            A[2, 1] = -sigma * math.copysign(1.0, u2) * r2
        x3 = float(x[2])
        M = np.linalg.inv(A + math.exp(-x3) * np.eye(3)) if x3 < 700 else np.linalg.inv(A)
        ls = -x3
    nrm = float(np.linalg.norm(M, 2))
    return ls + math.log(nrm), M / nrm


def _forward_log(v, tag, L):
    """log|F(v)| and F(v)/|F(v)| (floats) without forming F(v) when it is huge."""
    if tag == "H":
        v = hp.phi(v)
    y3 = v[2]
    fc = hp.face(v)
    drop = y3 > 3 * mp.mp.dps  # v e^{-y3} below working precision
    if tag == "G" and not drop:
        e = mp.exp(-y3)
        fc = [fc[i] + v[i] * e for i in range(3)]
    n = hp.norm(fc)
    return y3 + mp.log(n), [c / n for c in fc]


def _closed_form_log(a, p):
    """log|F(p)| and direction for the anchor image in closed form."""
    ke = p[2]
    if a.map_tag == "H":
        return ke - 2 * a.l1, [mp.mpf(0), mp.mpf(0), mp.mpf(1)]
    if ke > 3 * mp.mp.dps:
        return ke, [mp.mpf(0), mp.mpf(0), mp.mpf(1)]
    q = ke + mp.exp(ke)
    v = [p[0], p[1], q]
    n = hp.norm(v)
    return mp.log(n), [c / n for c in v]


def pullback_cell(parent, a, params=None, tol=1e-9, n_probe=256, c2=None, virtual=False, seed=0):
    """The child cell of ``parent`` for anchor ``a`` (an element of E_{m+1}(V))."""
    params = params or MapParams()
    m = parent.level
    c2 = c2_estimate() if c2 is None else c2
    dps = hp.digits_for(float(parent._log_t)) if m > 0 else 40
    with mp.workdps(dps):
        s1, s2 = a.s
        p = [mp.mpf(2 * s1), mp.mpf(2 * s2), hp.k_eta(a.k)]
        if not p[2] >= 3 * a.l1:
            raise DomainError(f"anchor {a} violates k eta(k) >= 3|s|_1")
        u = list(p)
        for b in reversed(parent.branch_word):
            u = hp.H_inv(u, b.s) if b.map_tag == "H" else hp.G_inv(u, b.s, params.L)
        # forward check h_m(u) = p, then one more step to the anchor image
        v = list(u)
        mags = []
        for b in parent.branch_word:
            v = hp.H(v) if b.map_tag == "H" else hp.G(v, params.L)
            mags.append(_logscalar_from_log(mp.log(hp.norm(v))))
        if m > 0 and hp.rel_diff(v, p) > tol:
            raise ConvergenceError(f"round trip h_m(u) = p failed for {a}: {float(hp.rel_diff(v, p))}")
        lg, direction = _forward_log(v, a.map_tag, params.L)
        lg_c, dir_c = _closed_form_log(a, p)
        err = abs(lg - lg_c) / max(abs(lg_c), 1) + max(abs(direction[i] - dir_c[i]) for i in range(3))
        if err > tol:
            raise ConvergenceError(f"anchor image mismatch {float(err)} for {a}")
        mags.append(_logscalar_from_log(lg_c))

        if m == 0:
            ls, M = 0.0, np.eye(3)
        else:
            last = parent.branch_word[-1]
            ls_f, M_f = _branch_derivative(last.map_tag, last.s, p, params.L)
            M = parent.frame @ M_f
            nrm = float(np.linalg.norm(M, 2))
            ls, M = parent.log_scale + ls_f + math.log(nrm), M / nrm

        if a.map_tag == "H":
            log_t = p[2] - 2 * a.l1
            delta = cell_offsets("H", a.s, sphere_points(n_probe))
        else:
            log_t = p[2] + mp.log1p(p[2] * mp.exp(-p[2])) if p[2] < 3 * dps else p[2]
            q_inv = mp.exp(-log_t)
            delta = cell_offsets(
                "G", a.s, sphere_points(n_probe), base3=float(log_t - p[2]),
                p_over_q=[float(c * q_inv) for c in p], inv_q=float(q_inv),
            )
        probes = delta @ M.T
        log_diam = ls + math.log(max_pairwise(probes))
        log_meas = 3 * ls + math.log(abs(np.linalg.det(M))) + math.log(unit_cell_measure())
        anchor_pre = np.array([float(c) for c in u])
        t = _logscalar_from_log(log_t)
    return CellNode(
        level=m + 1, branch_word=parent.branch_word + (a,), t=t, anchor_preimage=anchor_pre,
        log_scale=ls, frame=M, probes=probes, log_diam=log_diam, log_meas=log_meas,
        virtual=virtual, orbit=tuple(mags), seed=node_seed(seed, parent.branch_word + (a,)),
        _u=u, _log_t=log_t, _dps=dps,
    )


def _virtual_family(parent, tag, net, alpha, c2, cap, rng):
    """Sampled anchors and log family size for a cell at huge scale."""
    dps = hp.digits_for(float(parent._log_t))
    with mp.workdps(dps):
        t = mp.exp(parent._log_t)
        v_lo, v_hi = 0.75 * t + c2, 1.25 * t - c2
        k_star = hp.k_eta_inverse(t)
        lk = mp.log(k_star)
        log_nk = mp.log(v_hi - v_lo) - mp.log(mp.log(lk) + 1 / lk)
        if net.is_singleton:
            log_ns = mp.mpf(0)
            s_lo = s_hi = None
        else:
            s_lo, s_hi = (t / 6 + c2) / 2, (t / 4 - c2) / 2
            b = net.beta
            r_c = mp.sqrt(2) * (s_lo + s_hi) / 2
            log_ns = (mp.log(alpha * (2 - 2 * b) / (2 * mp.pi)) - 2 * b * mp.log(r_c)
                      + 2 * mp.log(s_hi - s_lo))
        log_n = float(log_nk + log_ns)
        chosen = []
        seen = set()
        n_base = (cap + 1) // 2
        for _ in range(n_base):
            u1, u2, u3 = rng.random(3)
            if s_lo is None:
                s = (0, 0)
            else:
                c1 = int(mp.floor(s_lo + mp.mpf(u1) * (s_hi - s_lo)))
                c2_ = int(mp.floor(s_lo + mp.mpf(u2) * (s_hi - s_lo)))
                if (c1 + c2_) % 2:
                    c2_ += 1 if c2_ + 1 <= s_hi else -1
                s = (c1, c2_)
            v = v_lo + mp.mpf(u3) * (v_hi - v_lo)
            k = int(mp.floor(hp.k_eta_inverse(v)))
            while hp.k_eta(k) < v_lo:
                k += 1
            partner = k + 1 if hp.k_eta(k + 1) <= v_hi else k - 1
            for kk in (k, partner):
                key = (s, kk)
                if key not in seen and len(chosen) < cap:
                    seen.add(key)
                    chosen.append(Anchor(s, kk, tag))
    return chosen, log_n


def _real_family(table, cap, rng):
    n = table.total
    if n <= cap:
        return table.anchors()
    idx = np.sort(rng.choice(n, size=(cap + 1) // 2, replace=False))
    chosen, seen = [], set()
    cum = np.cumsum(table.counts)
    for i in idx:
        a = table.anchor_at(int(i))
        b = int(np.searchsorted(cum, int(i), side="right"))
        partner = a.k + 1 if a.k + 1 <= table.k_hi[b] else a.k - 1
        for kk in (a.k, partner):
            key = (a.s, kk)
            if key not in seen and len(chosen) < cap and table.k_lo[b] <= kk <= table.k_hi[b]:
                seen.add(key)
                chosen.append(Anchor(a.s, kk, a.map_tag))
    return sorted(chosen, key=lambda x: (x.s, x.k))


def expand(node, net, params, config, c2, alpha):
    """Attach the sampled children of ``node``; mark it sterile if none survive."""
    tag = "H" if node.level % 2 == 0 else "G"
    rng = np.random.default_rng(node.seed % (2**63))
    virtual = node.level > 0
    if not virtual:
        table = family_table(tag, float(node.t.to_float()), net, c2, config.region)
        node.family_exact = table.total
        node.log_family = math.log(table.total) if table.total else -math.inf
        anchors = _real_family(table, config.child_cap, rng)
    else:
        anchors, node.log_family = _virtual_family(node, tag, net, alpha, c2, config.child_cap, rng)
    for a in anchors:
        try:
            child = pullback_cell(node, a, params, n_probe=config.n_probe, c2=c2,
                                  virtual=virtual, seed=config.seed)
        except (ConvergenceError, DomainError) as exc:
            node.diagnostics.append(f"anchor {a.s},{a.k} skipped: {exc}")
            continue
        node.children.append(child)
    node.sterile = not node.children


def build_tree(R0, depth, child_cap, net, params=None, seed=0, n_probe=256, region="box", c2=None):
    """Nested cells to the given depth with at most ``child_cap`` children per node."""
    params = params or MapParams()
    config = TreeConfig(float(R0), int(depth), int(child_cap), int(seed), int(n_probe), region)
    if R0 < params.R_cert:
        raise ConfigError(f"R0 = {R0} is below R_cert = {params.R_cert}")
    if depth > MAX_DEPTH:
        raise OutOfRangeError(
            f"depth {depth} > {MAX_DEPTH}: level-3 anchors would need about exp(t_V) digits"
        )
    c2 = c2_estimate() if c2 is None else c2
    alpha = density_alpha(net)
    root = root_cell(R0, seed)
    tree = Tree(root, config, c2, alpha)
    frontier = [root]
    for _ in range(depth):
        nxt = []
        for v in frontier:
            expand(v, net, params, config, c2, alpha)
            nxt.extend(v.children)
        frontier = nxt
    if depth > 0 and root.sterile:
        raise DomainError(f"root K({R0}) is sterile: U_H({R0}) is empty for this net")
    assign_measure(tree)
    return tree


def _fertile(node, depth):
    if node.level == depth:
        return True
    return any(_fertile(c, depth) for c in node.children)


def assign_measure(tree):
    """mu_0(K0) = 1 and mu_{m+1}(W) proportional to meas W among fertile siblings."""
    depth = tree.config.depth
    root = tree.root
    root.measure = 1.0
    root.log_cell_measure = 0.0
    stack = [root]
    while stack:
        v = stack.pop()
        if not v.children:
            continue
        fert = [c for c in v.children if _fertile(c, depth)]
        for c in v.children:
            if c not in fert:
                c.sterile = True
                c.measure = 0.0
        if not fert:
            v.sterile = True
            continue
        lw = np.array([c.log_meas for c in fert])
        w = np.exp(lw - logsumexp(lw))
        w /= w.sum()
        for c, wi in zip(fert, w):
            c.measure = v.measure * float(wi)
        # density of E_{m+1} in V from the full family: N * mean sampled meas / meas V
        log_mean = float(logsumexp(lw) - math.log(len(lw)))
        v.log_density = v.log_family + log_mean - v.log_meas
        for c in fert:
            c.log_cell_measure = v.log_cell_measure + c.log_meas - (v.log_family + log_mean)
        stack.extend(fert)
    return tree


def cell_geometry(cell, n_probe=256):
    """(diam_est, meas_est, log_diam, log_meas) of ``cell``, recomputed with n_probe probes."""
    if cell.level == 0:
        return CellGeometry(cell.diam_est, cell.meas_est, cell.log_diam, cell.log_meas, True)
    a = cell.anchor
    omega = sphere_points(n_probe)
    if a.map_tag == "H":
        delta = cell_offsets("H", a.s, omega)
    else:
        with mp.workdps(cell._dps):
            q_inv = mp.exp(-cell._log_t)
            p3 = hp.k_eta(a.k)
            p = [mp.mpf(2 * a.s[0]), mp.mpf(2 * a.s[1]), p3]
            delta = cell_offsets("G", a.s, omega, base3=float(cell._log_t - p3),
                                 p_over_q=[float(c * q_inv) for c in p], inv_q=float(q_inv))
    ok = np.all(np.isfinite(delta), axis=1)
    probes = delta[ok] @ cell.frame.T
    log_diam = cell.log_scale + math.log(max_pairwise(probes))
    log_meas = 3 * cell.log_scale + math.log(abs(np.linalg.det(cell.frame))) + math.log(unit_cell_measure())
    reliable = ok.mean() >= 0.8
    return CellGeometry(
        math.exp(log_diam) if log_diam > -745 else 0.0,
        math.exp(log_meas) if log_meas > -745 else 0.0,
        log_diam, log_meas, bool(reliable),
    )


@dataclass(frozen=True)
class CellGeometry:
    diam_est: float
    meas_est: float
    log_diam: float
    log_meas: float
    reliable: bool


# ---------------------------------------------------------------- checks


def _shape_fn(cell):
    """omega -> probe offset in the cell's frame (continuous in omega)."""
    a = cell.anchor
    if a.map_tag == "H":
        return lambda om: cell_offsets("H", a.s, om) @ cell.frame.T
    with mp.workdps(cell._dps):
        q_inv = mp.exp(-cell._log_t)
        p = [mp.mpf(2 * a.s[0]), mp.mpf(2 * a.s[1]), hp.k_eta(a.k)]
        base3 = float(cell._log_t - p[2])
        pq = [float(c * q_inv) for c in p]
        iq = float(q_inv)
    return lambda om: cell_offsets("G", a.s, om, base3, pq, iq) @ cell.frame.T


def _angles_to_sphere(th, ph):
    return np.array([[math.sin(th) * math.cos(ph), math.sin(th) * math.sin(ph), math.cos(th)]])


def _to_angles(w):
    return math.acos(max(-1.0, min(1.0, w[2]))), math.atan2(w[1], w[0])


def set_distance(D, fa, fb, scale_b=1.0, n_probe=1024, refine_below=math.inf):
    """Distance between the closed surfaces fa(S^2) and D + scale_b * fb(S^2).

    A dense probe search, followed by a local refinement over both sphere
    parameters when the probe distance is below ``refine_below``.  Probe
    distances overestimate the true one, so refinement matters only near a
    threshold.
    """
    om = sphere_points(n_probe, seed=3)
    A = fa(om)
    B = D + scale_b * fb(om)
    dist, j = cKDTree(B).query(A)
    i = int(np.argmin(dist))
    best = float(dist[i])
    if best >= refine_below:
        return best
    x0 = np.array(_to_angles(om[i]) + _to_angles(om[j[i]]))

    def obj(z):
        pa = fa(_angles_to_sphere(z[0], z[1]))[0]
        pb = D + scale_b * fb(_angles_to_sphere(z[2], z[3]))[0]
        return float(np.linalg.norm(pa - pb))

    res = minimize(obj, x0, method="Nelder-Mead", options={"xatol": 1e-7, "fatol": 1e-10, "maxiter": 2000})
    return min(best, float(res.fun))


def _scaled_anchors(kids):
    """Per child i, the mp vectors u_j * e^{-ls_i} are formed lazily from these."""
    dps = max(k._dps for k in kids)
    with mp.workdps(dps):
        return dps, [mp.exp(-mp.mpf(k.log_scale)) for k in kids]


def _scaled_offset(wi, wj, f_i, dps):
    """(u_j - u_i) e^{-ls_i} as floats (inf when out of range)."""
    with mp.workdps(dps):
        out = []
        for a in range(3):
            v = (wj._u[a] - wi._u[a]) * f_i
            out.append(float(v) if abs(v) < 1e300 else math.copysign(math.inf, float(mp.sign(v))))
    return np.array(out)


def sibling_pairs_report(parent, threshold_fn=None, n_probe=1024):
    """Separation of sampled sibling pairs under ``parent``.

    Returns a list of dicts with dist / diam (both directions) and, when
    ``threshold_fn`` is given, dist / threshold.
    """
    kids = parent.children
    rows = []
    shapes = [_shape_fn(c) for c in kids]
    radii = [float(np.max(np.linalg.norm(c.probes, axis=1))) for c in kids]
    diam_scaled = [math.exp(c.log_diam - c.log_scale) for c in kids]
    if not kids:
        return rows
    dps, fac = _scaled_anchors(kids)
    for i in range(len(kids)):
        for j in range(i + 1, len(kids)):
            wi, wj = kids[i], kids[j]
            D = _scaled_offset(wi, wj, fac[i], dps)
            rho = math.exp(wj.log_scale - wi.log_scale)
            nd = float(np.linalg.norm(D))
            lower = nd - radii[i] - rho * radii[j]
            diam_ij = max(diam_scaled[i], rho * diam_scaled[j])
            need = diam_ij if threshold_fn is None else threshold_fn() * math.exp(-wi.log_scale)
            if not math.isfinite(nd) or lower > 2.0 * max(need, diam_ij):
                dist = lower if math.isfinite(lower) else math.inf
                exact = False
            else:
                dist = set_distance(D, shapes[i], shapes[j], rho, n_probe, refine_below=1.5 * need)
                exact = True
            row = {
                "pair": (i, j),
                "dist_over_diam": dist / diam_ij,
                "refined": exact,
            }
            if threshold_fn is not None:
                row["dist_over_threshold"] = dist * math.exp(wi.log_scale) / threshold_fn()
            rows.append(row)
    return rows


def growth_floor_ok(node):
    """|h_j(x)| >= 6 exp^j(|x|/6) for j = 1..level at the anchor preimage x."""
    r = float(np.linalg.norm(node.anchor_preimage))
    out = []
    for j, mag in enumerate(node.orbit, start=1):
        floor = LogScalar(j, r / 6.0).mul_real(6.0) if r > 0 else LogScalar(0, 6.0)
        out.append(logscalar_cmp(mag, floor, rtol=0.0) >= 0)
    return out


def tree_checks(tree, n_probe=1024):
    """Measure conservation, sibling separation, growth floor and diameter trends."""
    levels = tree.levels()
    depth = tree.config.depth
    out = {}
    totals = []
    for lev in levels:
        totals.append(float(sum(v.measure for v in lev if not v.sterile)))
    worst_node = 0.0
    for v in tree.nodes():
        fert = [c for c in v.children if not c.sterile]
        if fert:
            worst_node = max(worst_node, abs(sum(c.measure for c in fert) - v.measure) / v.measure)
    out["measure_totals"] = totals
    out["measure_conservation_ok"] = all(abs(t - 1.0) <= 1e-9 for t in totals) and worst_node <= 1e-9
    out["measure_worst_node_rel"] = worst_node

    R0 = tree.config.R0
    thr = eta(R0) / 4.0
    lvl1 = sibling_pairs_report(tree.root, threshold_fn=lambda: thr, n_probe=n_probe) if depth >= 1 else []
    r34 = [row["dist_over_threshold"] for row in lvl1]
    out["level1_pairs"] = len(lvl1)
    out["level1_min_dist_over_eta4"] = min(r34) if r34 else None
    out["level1_separation_ok"] = all(x >= 1.0 for x in r34)
    out["level1_min_dist_over_diam"] = min((row["dist_over_diam"] for row in lvl1), default=None)

    sib = []
    for lev in levels[1:-1] if depth >= 2 else []:
        for v in lev:
            sib.extend(row["dist_over_diam"] for row in sibling_pairs_report(v, n_probe=n_probe))
    out["sibling_pairs"] = len(sib)
    out["sibling_min_dist_over_diam"] = min(sib) if sib else None
    out["sibling_separation_ok"] = all(x >= 1.0 for x in sib)

    floors = [ok for v in tree.nodes()[1:] for ok in growth_floor_ok(v)]
    out["growth_floor_checks"] = len(floors)
    out["growth_floor_ok"] = all(floors)

    if depth >= 1:
        d1 = np.array([v.diam_est for v in levels[1]])
        out["level1_diam_range"] = [float(d1.min()), float(d1.max())]
        out["level1_diam_band_ok"] = bool(np.all((d1 >= 0.1 * tree.c2) & (d1 <= tree.c2 * (1 + 1e-9))))
    prods = []
    for lev in levels[2:]:
        for w in lev:
            m = w.level - 1
            lg = w.log_diam + sum(w.orbit[j].log_float() for j in range(m))
            prods.append(abs(lg) / m)
    out["diameter_product_c"] = math.exp(max(prods)) if prods else None
    return out

