"""Empirical dimension exponents: box counts, mass-radius slopes, U-count slopes."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import stats
from scipy.spatial import cKDTree

from zlab.errors import DegenerateSampleError, DomainError
from zlab.fractal.family import eta, family_table, u_count_slope
from zlab.fractal.tree import build_tree, tree_checks
from zlab.maps import MapParams
from zlab.net import NetConfig, build_net

BAND_SIGMAS = 2.0


@dataclass(frozen=True)
class BoxCount:
    scales: list
    counts: list
    slope: float
    intercept: float
    stderr: float
    residuals: list

    def to_dict(self):
        return asdict(self)


def _box_counts(points, scales):
    lo = points.min(axis=0)
    ext = np.ptp(points, axis=0)
    out = []
    for d in scales:
        # closed boxes: the far face of the bounding box joins the last box
        top = np.maximum(np.ceil(ext / d) - 1, 0)
        idx = np.minimum(np.floor((points - lo) / d), top).astype(np.int64)
        out.append(len(np.unique(idx, axis=0)))
    return np.array(out)


def default_scales(points, saturation=0.1, max_halvings=24):
    """Dyadic scales from extent/2 down to where boxes average 1/saturation points."""
    points = np.asarray(points, dtype=float)
    extent = float(np.max(np.ptp(points, axis=0)))
    if extent == 0:
        return [1.0, 0.1]
    n = len(points)
    scales = []
    for j in range(1, max_halvings + 1):
        d = extent * 2.0**-j
        if _box_counts(points, [d])[0] > saturation * n:
            break
        scales.append(d)
    return scales


def box_count(points, scales=None):
    """Least-squares slope of log N(delta) against log(1/delta).

    ``points`` is an (n, d) array.  Scales default to the unsaturated dyadic
    range.  A single (possibly repeated) point has slope 0.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if len(pts) == 0:
        raise DomainError("box_count needs a nonempty input")
    scales = default_scales(pts) if scales is None else [float(d) for d in scales]
    if len(scales) < 2 or max(scales) / min(scales) < 10.0 * (1 - 1e-12):
        raise DomainError("insufficient scale range: need >= 2 scales spanning >= 1 decade")
    if min(scales) <= 0:
        raise DomainError("scales must be positive")
    if np.all(np.ptp(pts, axis=0) == 0):
        n = len(scales)
        return BoxCount(scales, [1] * n, 0.0, 0.0, 0.0, [0.0] * n)
    counts = _box_counts(pts, scales)
    if np.all(counts == 1):
        raise DegenerateSampleError("input occupies a single box at every scale; slope undefined")
    x = np.log(1.0 / np.array(scales))
    y = np.log(counts)
    fit = stats.linregress(x, y)
    res = y - (fit.intercept + fit.slope * x)
    return BoxCount(scales, counts.tolist(), float(fit.slope), float(fit.intercept),
                    float(fit.stderr), res.tolist())


def mass_radius_slope(centres, masses, at, radii):
    """Mean over ``at`` of the slope of log mu(B(x, r)) against log r.

    mu is the discrete measure with ``masses`` at ``centres``.  Returns the
    mean slope, its standard error and the per-point slopes.
    """
    centres = np.asarray(centres, dtype=float)
    masses = np.asarray(masses, dtype=float)
    at = np.asarray(at, dtype=float)
    radii = np.asarray(radii, dtype=float)
    if len(radii) < 2 or radii.max() / radii.min() < 10.0 * (1 - 1e-12):
        raise DomainError("insufficient scale range: need >= 2 radii spanning >= 1 decade")
    tree = cKDTree(centres)
    lr = np.log(radii)
    slopes = []
    for x in at:
        mu = np.array([masses[tree.query_ball_point(x, r)].sum() for r in radii])
        if np.any(mu <= 0):
            continue
        slopes.append(float(np.polyfit(lr, np.log(mu), 1)[0]))
    if not slopes:
        raise DegenerateSampleError("no evaluation point carries mass at every radius")
    s = np.array(slopes)
    se = float(s.std(ddof=1) / math.sqrt(len(s))) if len(s) > 1 else 0.0
    return float(s.mean()), se, slopes


def sandwich_stability(u, rho, tolerance=0.5):
    """Fitted constants of C t^rho / eta(t) <= count <= C' (2t)^rho across t."""
    t = np.array(u["t"])
    c = np.array(u["counts"], dtype=float)
    good = c > 0
    if good.sum() < 2:
        return {"status": "insufficient scale range", "ok": False}
    t, c = t[good], c[good]
    lower = c * eta(t) / t**rho
    upper = c / (2 * t) ** rho
    out = {"status": "ok"}
    for name, v in (("lower", lower), ("upper", upper)):
        med = float(np.median(v))
        spread = [float(v.min() / med), float(v.max() / med)]
        out[f"C_{name}"] = med
        out[f"C_{name}_spread"] = spread
        out[f"C_{name}_stable"] = bool(spread[0] >= 1 - tolerance and spread[1] <= 1 + tolerance)
    out["ok"] = out["C_lower_stable"] and out["C_upper_stable"]
    return out


def _band(est, se):
    return [est - BAND_SIGMAS * se, est + BAND_SIGMAS * se]


def level1_scales(R0, n=10):
    """Scales between twice the vertical anchor spacing and R0/16."""
    return np.geomspace(2.0 * eta(R0), R0 / 16.0, n)


def dimension_report(rho, depth=2, caps=64, seeds=0, params=None, R0=4000.0, r_max=2500.0,
                     n_probe=256, net=None, return_tree=False):
    """Three exponent estimates for the construction at ``rho`` with trend checks.

    (i) box count of the level-1 anchor family, (ii) mass-radius slope of
    mu_1 at the tree's level-1 anchors, (iii) U-count slope.  The level-1
    family is used in full (its size is recorded by the tree); deeper cells
    lie at scales below double resolution relative to their ancestors.
    """
    params = params or MapParams()
    net = net if net is not None else build_net(NetConfig(float(rho), float(r_max)))
    tree = build_tree(R0, depth, caps, net, params, seed=seeds, n_probe=n_probe)
    checks = tree_checks(tree)
    table = family_table("H", R0, net, tree.c2)
    P = table.points()
    scales = level1_scales(R0)
    est = {}
    try:
        bc = box_count(P, scales)
        est["box_count"] = {"estimate": bc.slope, "stderr": bc.stderr, "band": _band(bc.slope, bc.stderr),
                            "scales": bc.scales, "counts": bc.counts, "n_points": len(P), "status": "ok"}
    except (DomainError, DegenerateSampleError) as exc:
        est["box_count"] = {"estimate": None, "status": str(exc)}
    lvl1 = tree.levels()[1] if depth >= 1 else []
    at = np.array([v.anchor_preimage for v in lvl1])
    try:
        m, se, per = mass_radius_slope(P, np.full(len(P), 1.0 / len(P)), at, scales)
        est["mass_exponent"] = {"estimate": m, "stderr": se, "band": _band(m, se),
                                "radii": scales.tolist(), "n_points": len(per), "status": "ok"}
    except (DomainError, DegenerateSampleError) as exc:
        est["mass_exponent"] = {"estimate": None, "status": str(exc)}
    u = u_count_slope(net, c2=tree.c2)
    est["u_count"] = {"estimate": u["slope"], "stderr": u["stderr"],
                      "band": _band(u["slope"], u["stderr"]) if u["slope"] is not None else None,
                      "t": u["t"], "counts": u["counts"], "n_used": u["n_used"], "status": u["status"]}
    trends = {
        "diameter_product": {"fitted_c": checks["diameter_product_c"]},
        "sibling_separation": {"min_dist_over_diam": checks["sibling_min_dist_over_diam"],
                          "ok": checks["sibling_separation_ok"]},
        "count_sandwich": sandwich_stability(u, float(rho)),
    }
    levels = tree.levels()
    report = {
        "rho": float(rho),
        "estimators": est,
        "checks": checks,
        "trends": trends,
        "tree": {
            "R0": float(R0), "depth": depth, "child_cap": caps, "seed": seeds,
            "level_sizes": [len(lev) for lev in levels],
            "root_family": table.total,
            "sterile_nodes": sum(v.sterile for v in tree.nodes()),
            "skipped_anchors": sum(len(v.diagnostics) for v in tree.nodes()),
        },
    }
    if return_tree:
        return report, tree
    return report
