"""Acceptance criteria, one test per criterion at its stated tolerance."""

import math
import subprocess
import sys

import numpy as np
import pytest

from zlab.dynamics import sandwich_check
from zlab.fractal.estimators import box_count
from zlab.fractal.family import u_count_slope
from zlab.maps import (
    dilatation_sample,
    inverse_branch_G,
    inverse_branch_H,
    inverse_branch_Z,
    map_f,
    map_G,
    map_H,
    zorich_Z,
)
from zlab.net import NetConfig, build_net, count_in_ball, separation_violations, verify_net

BETAS = (0.25, 0.5, 0.75, 1.0)
RHOS = (1.5, 2.0, 2.5)

pytestmark = pytest.mark.slow


def rel(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return np.linalg.norm(a - b, axis=-1) / np.maximum(np.linalg.norm(b, axis=-1), 1e-300)


@pytest.fixture(scope="module")
def big_nets():
    return {b: build_net(NetConfig.from_beta(b, r_max=1e4)) for b in BETAS}


@pytest.fixture(scope="module")
def big_reports(big_nets):
    return {b: verify_net(n, n_samples=10_000, rng_seed=1) for b, n in big_nets.items()}


def test_criterion_01_net_exactness(big_nets, big_reports, verdict):
    parts, ok = [], True
    for b in BETAS:
        net, rep = big_nets[b], big_reports[b]
        sep = separation_violations(net.points, b, limit=1) if len(net) > 1 else []
        good = (not sep and rep.first_point_origin and not rep.parity_violations
                and rep.covering_samples == 10_000 and not rep.covering_violations)
        ok &= good
        parts.append(f"beta={b}: n={len(net)} sep={len(sep)} cover_bad={len(rep.covering_violations)}")
    verdict(1, "net separation exact, covering at 1e4 points", ok, "; ".join(parts))


def test_criterion_02_counting_exponent(big_nets, big_reports, verdict):
    rng = np.random.default_rng(2)
    parts, ok = [], True
    for b in BETAS:
        net, rep = big_nets[b], big_reports[b]
        target = 2 - 2 * b
        slope = rep.exponent
        # 1e3 cap samples with r < 8|x|^beta and B(x, r) inside the net disc
        counts = []
        while len(counts) < 1000:
            nx = rng.uniform(1.0, 5e3)
            r = rng.uniform(0.0, 8.0 * nx**b)
            if nx + r > net.config.r_max:
                continue
            a = rng.uniform(0, 2 * math.pi)
            counts.append(count_in_ball(net, (nx * math.cos(a), nx * math.sin(a)), r))
        good = abs(slope - target) <= 0.15 and max(counts) <= 324
        ok &= good
        parts.append(f"beta={b}: slope={slope:.3f} (target {target:.2f}) cap_max={max(counts)}")
    verdict(2, "count exponent 2-2beta +- 0.15, cap <= 324", ok, "; ".join(parts))


def _boundary_points(rng, n):
    """Points on beam faces x1 = 2 s1 + 1 or x2 = 2 s2 + 1."""
    s = rng.integers(-6, 7, (n, 2))
    t = rng.uniform(-1, 1, n)
    face = rng.integers(0, 2, n)
    x1 = np.where(face == 0, 2 * s[:, 0] + 1.0, 2 * s[:, 0] + t)
    x2 = np.where(face == 0, 2 * s[:, 1] + t, 2 * s[:, 1] + 1.0)
    return np.column_stack([x1, x2, np.zeros(n)]), face


def test_criterion_03_map_correctness(net_half, params, verdict):
    rng = np.random.default_rng(3)
    n = 10_000
    x, face = _boundary_points(rng, n)
    x[:, 2] = rng.uniform(-5, 8, n)
    eps = np.where(face[:, None] == 0, [[1e-12, 0, 0]], [[0, 1e-12, 0]])
    cont = {}
    for name, F in (("Z", zorich_Z), ("H", map_H), ("G", lambda p: map_G(p, params)),
                    ("f", lambda p: map_f(p, net_half, params))):
        y = x.copy()
        if name in ("H", "f"):
            y[:, 2] += np.abs(y[:, 0]) + np.abs(y[:, 1])
        cont[name] = float(np.max(rel(F(y - eps), F(y + eps))))

    m = 1000
    s = rng.integers(-6, 7, (m, 2))
    s[:, 1] += (s[:, 0] + s[:, 1]) % 2  # even parity for G's upper-half branches
    u = np.column_stack([2 * s[:, 0] + rng.uniform(-0.99, 0.99, m), 2 * s[:, 1] + rng.uniform(-0.99, 0.99, m)])
    xz = np.column_stack([u, rng.uniform(-10, 10, m)])
    rt_z = max(float(rel(inverse_branch_Z(zorich_Z(p), tuple(si)), p)) for p, si in zip(xz, s))
    xh = np.column_stack([u, rng.uniform(-10, 10, m) + np.abs(u).sum(axis=1)])
    rt_h = max(float(rel(inverse_branch_H(map_H(p), tuple(si)), p)) for p, si in zip(xh, s))
    xg = np.column_stack([u, rng.uniform(params.L + 3, 30, m)])
    rt_g = max(float(rel(inverse_branch_G(map_G(p, params), tuple(si), params), p)) for p, si in zip(xg, s))

    j = dilatation_sample("phi", np.array([0.3, -0.7, 2.0]))
    target = (2 + math.sqrt(3)) / (2 - math.sqrt(3))
    phi_ok = abs(j.ratio**2 - target) <= 1e-6 * target and abs(j.ratio - (2 + math.sqrt(3))) <= 1e-6 * j.ratio
    ok = max(cont.values()) < 1e-9 and max(rt_z, rt_h, rt_g) < 1e-9 and phi_ok
    detail = (" ".join(f"{k}={v:.1e}" for k, v in cont.items())
              + f"; round trips Z={rt_z:.1e} H={rt_h:.1e} G={rt_g:.1e}; phi sv ratio^2={j.ratio**2:.7f}")
    verdict(3, "continuity, inverse round trips, phi distortion", ok, detail)


def test_criterion_04_growth_sandwich(net_half, params, verdict):
    parts, ok = [], True
    for R in (5.0, 10.0):
        rep = sandwich_check(R, 10_000, rng_seed=4, net=net_half, params=params)
        ll = rep["loglog_M"]
        good = R <= ll <= 2 * R + 0.5
        ok &= good
        parts.append(f"R={R:g}: loglog M={ll:.4f}")
    verdict(4, "R <= loglog M(R, f) <= 2R + 0.5", ok, "; ".join(parts))


def test_criterion_05_scale_invariance(verdict):
    rng = np.random.default_rng(5)
    worst, n = 0.0, 0
    while n < 1000:
        x = np.array([rng.uniform(-0.95, 0.95), rng.uniform(-0.95, 0.95), rng.uniform(-3, 5)])
        if abs(abs(x[0]) - abs(x[1])) < 1e-3 or min(abs(x[0]), abs(x[1])) < 1e-3:
            continue
        a = np.linalg.norm(zorich_Z(x)) / dilatation_sample("Z", x).opnorm
        for c in (2.0, 5.0):
            y = x + [0, 0, c]
            b = np.linalg.norm(zorich_Z(y)) / dilatation_sample("Z", y).opnorm
            worst = max(worst, abs(a - b) / abs(b))
        n += 1
    verdict(5, "|Z|/|DZ| invariant under vertical shifts c in {2, 5}", worst < 1e-5, f"worst rel={worst:.2e} over {n}")


def test_criterion_06_u_exponent(nets_frac, verdict):
    parts, ok = [], True
    for rho in RHOS:
        u = u_count_slope(nets_frac[rho], np.geomspace(300.0, 1e4, 25))
        slope = u["slope"]
        good = slope is not None and abs(slope - rho) <= 0.25
        ok &= good
        sl = "undefined" if slope is None else f"{slope:.3f}"
        parts.append(f"rho={rho}: slope={sl} ({u['n_used']}/25 t nonzero)")
    verdict(6, "U-count slope rho +- 0.25", ok, "; ".join(parts))


def test_criterion_07_tree_invariants(dimension_reports, verdict):
    rep, tree = dimension_reports(2.5)
    ch = rep["checks"]
    totals_ok = all(abs(t - 1) <= 1e-9 for t in ch["measure_totals"])
    ok = (totals_ok and ch["measure_conservation_ok"] and ch["sibling_separation_ok"]
          and ch["level1_separation_ok"] and ch["growth_floor_ok"] and len(tree.levels()) == 3)
    detail = (f"levels={rep['tree']['level_sizes']} totals={ch['measure_totals']} "
              f"sibling dist/diam={ch['sibling_min_dist_over_diam']:.4f} over {ch['sibling_pairs']} pairs; "
              f"level1 dist/(eta/4)={ch['level1_min_dist_over_eta4']:.4f} over {ch['level1_pairs']} pairs; "
              f"growth floor={ch['growth_floor_ok']} ({ch['growth_floor_checks']} steps)")
    verdict(7, "tree invariants at depth 2, cap 64, rho 2.5", ok, detail)


def test_criterion_08_dimension_ordering(dimension_reports, verdict):
    ests = {}
    for rho in RHOS:
        rep, _ = dimension_reports(rho)
        ests[rho] = {k: v["estimate"] for k, v in rep["estimators"].items()}
    parts, ok = [], True
    for name in ("box_count", "mass_exponent", "u_count"):
        vals = [ests[r][name] for r in RHOS]
        good = all(v is not None for v in vals) and all(a < b for a, b in zip(vals, vals[1:]))
        ok &= good
        parts.append(f"{name}=" + "/".join("none" if v is None else f"{v:.3f}" for v in vals))
    verdict(8, "estimators strictly increasing in rho (1.5, 2, 2.5)", ok, "; ".join(parts))


def test_criterion_09_box_count_calibration(verdict):
    rng = np.random.default_rng(9)
    cube = box_count(rng.uniform(0, 1, (1_000_000, 3))).slope
    x = rng.uniform(0, 1, 10_000)
    seg = box_count(np.column_stack([x, 2 * x + 1, -x])).slope
    pt = box_count(np.array([[0.3, -1.0, 2.0]]), [1.0, 0.1, 0.01]).slope
    ok = abs(cube - 3) <= 0.1 and abs(seg - 1) <= 0.1 and pt == 0
    verdict(9, "box count cube 3, segment 1, point 0", ok, f"cube={cube:.4f} segment={seg:.4f} point={pt}")


def test_criterion_10_determinism(tmp_path, verdict):
    # the same command line twice; outputs are read back after each run
    cmd = [sys.executable, "-m", "zlab.cli", "frac", "dimension", "--rho", "2.5", "--depth", "2",
           "--seed", "7", "-o", "dim.json", "--pgm", "dim.pgm"]
    outs = []
    for _ in range(2):
        proc = subprocess.run(cmd, cwd=tmp_path, capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
        outs.append(((tmp_path / "dim.json").read_bytes(), (tmp_path / "dim.pgm").read_bytes()))
        (tmp_path / "dim.json").unlink()
        (tmp_path / "dim.pgm").unlink()
    same_json = outs[0][0] == outs[1][0]
    same_pgm = outs[0][1] == outs[1][1]
    verdict(10, "frac dimension byte-identical across runs", same_json and same_pgm,
            f"json={len(outs[0][0])} bytes identical={same_json}; pgm={len(outs[0][1])} bytes identical={same_pgm}")
