"""Command-line interface: ``zlab <group> <command> [options]``.

Exit codes: 0 success, 1 verification or I/O failure (a JSON witness is
written to stderr), 2 configuration error.  Options may also come from a
JSON file given with ``--config``; explicit flags take precedence.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
from dataclasses import dataclass, field

import numpy as np

from zlab import io
from zlab.errors import ConfigError, DomainError, FormatError, OutOfRangeError, VerificationError, ZlabError
from zlab.maps import MapParams

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


@dataclass(frozen=True)
class RunConfig:
    """Resolved settings of one CLI run (embedded in every artifact)."""

    command: str
    rho: float = 2.0
    r_max: float = 1e4
    R0: float = 4000.0
    L: float = 2.0
    R_cert: float = 5.0
    depth: int = 2
    child_cap: int = 64
    n_probe: int = 256
    horizon: int = 8
    R: float = 10.0
    seed: int = 0
    n_samples: int = 10_000
    outputs: dict = field(default_factory=dict)

    def __post_init__(self):
        from zlab.fractal.tree import MAX_DEPTH

        if not 1.0 <= self.rho < 3.0:
            raise ConfigError(f"rho must lie in [1, 3), got {self.rho}")
        if self.r_max < 10:
            raise ConfigError("r_max must be at least 10")
        if not 0 <= self.depth <= MAX_DEPTH:
            raise ConfigError(f"depth must lie in 0..{MAX_DEPTH}")
        if self.child_cap < 1 or self.n_probe < 16 or self.n_samples < 1:
            raise ConfigError("child_cap >= 1, n_probe >= 16 and n_samples >= 1 are required")
        if self.horizon < 2:
            raise ConfigError("horizon must be at least 2")
        if self.R < self.R_cert or self.R0 < self.R_cert:
            raise ConfigError(f"R and R0 must be at least R_cert = {self.R_cert}")
        if not self.L > 0:
            raise ConfigError("L must be positive")

    @property
    def params(self):
        return MapParams(L=self.L, R_cert=self.R_cert)

    def to_dict(self):
        return dataclasses.asdict(self)


CONFIG_KEYS = {f.name for f in dataclasses.fields(RunConfig)} - {"command", "outputs"}

COMMAND_DEFAULTS = {
    "net build": {"r_max": 1e4},
    "net verify": {},
    "dyn classify": {"r_max": 1e3},
    "dyn maxmod": {"r_max": 1e3},
    "dyn growth": {"r_max": 1e3},
    "frac tree": {"r_max": 2500.0},
    "frac dimension": {"r_max": 2500.0},
    "render slice": {"r_max": 1e3},
}


def _read_config_file(path):
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")
    unknown = set(data) - CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return data


def resolve_config(command, args, outputs=None):
    """Defaults, then the JSON file, then explicit flags."""
    merged = dict(COMMAND_DEFAULTS.get(command, {}))
    merged.update(_read_config_file(getattr(args, "config", None)))
    for key in CONFIG_KEYS:
        v = getattr(args, key, None)
        if v is not None:
            merged[key] = v
    try:
        return RunConfig(command=command, outputs=outputs or {}, **merged)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


# ---------------------------------------------------------------- helpers


def _write_text(path, text):
    if path in (None, "-"):
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def _net_for(cfg, args):
    from zlab.net import NetConfig, build_net

    if getattr(args, "net", None):
        return io.load_net(args.net, trust=args.trust)
    return build_net(NetConfig(cfg.rho, cfg.r_max))


def _witness(message, witness=None):
    sys.stderr.write(json.dumps(io.to_jsonable({"error": message, "witness": witness}), sort_keys=True) + "\n")


# ---------------------------------------------------------------- commands


def cmd_net_build(args):
    from zlab.net import NetConfig, build_net

    cfg = resolve_config("net build", args, {"output": args.output})
    net = build_net(NetConfig(cfg.rho, cfg.r_max))
    io.save_net(net, args.output, cfg.to_dict())
    _write_text(None, io.dumps({"config": cfg.to_dict(), "count": len(net),
                                "certified_radius": net.certified_radius}))
    return EXIT_OK


def cmd_net_verify(args):
    from zlab.net import verify_net

    cfg = resolve_config("net verify", args, {"input": args.path})
    try:
        net = io.load_net(args.path, trust=False)
    except VerificationError as exc:
        _witness(str(exc), exc.witness)
        return EXIT_FAIL
    rep = verify_net(net, n_samples=cfg.n_samples, rng_seed=cfg.seed)
    out = {"config": cfg.to_dict(), "report": rep.to_dict()}
    _write_text(args.output, io.dumps(out))
    if not rep.exact_ok or rep.cap_violations:
        bad = rep.separation_violations or rep.covering_violations or rep.parity_violations
        _witness("net verification failed", bad[0] if bad else {"cap_violations": rep.cap_violations})
        return EXIT_FAIL
    return EXIT_OK


def _read_points(args):
    pts = [list(p) for p in (args.point or [])]
    if args.points:
        _, header, rows = io.read_csv(args.points)
        cols = [header.index(c) for c in ("x1", "x2", "x3")] if "x1" in header else [0, 1, 2]
        pts.extend([float(r[c]) for c in cols] for r in rows if r)
    if not pts:
        raise ConfigError("dyn classify needs --point or --points")
    return np.array(pts, dtype=float)


def cmd_dyn_classify(args):
    from zlab.dynamics import classify_many, loglog_final

    cfg = resolve_config("dyn classify", args, {"output": args.output})
    pts = _read_points(args)
    net = _net_for(cfg, args)
    res = classify_many(pts, cfg.R, cfg.horizon, net, cfg.params)
    rows = [[*map(float, p), s.verdict, s.m0, loglog_final(s)] for p, s in zip(pts, res)]
    rows = [[*r[:5], r[5] if math.isfinite(r[5]) else None] for r in rows]
    if args.output in (None, "-"):
        w = sys.stdout
        w.write("# config " + json.dumps(cfg.to_dict(), sort_keys=True) + "\n")
        w.write(",".join(io.CLASSIFY_COLUMNS) + "\n")
        for r in rows:
            w.write(",".join("" if v is None else (repr(v) if isinstance(v, float) else str(v)) for v in r) + "\n")
    else:
        io.write_csv(args.output, io.CLASSIFY_COLUMNS, rows, cfg.to_dict())
    return EXIT_OK


def cmd_dyn_maxmod(args):
    from zlab.dynamics import max_modulus

    cfg = resolve_config("dyn maxmod", args, {"output": args.output})
    net = _net_for(cfg, args)
    M = max_modulus(args.map, args.r, cfg.n_samples, cfg.seed, net, cfg.params, args.region)
    out = {"config": cfg.to_dict(), "map": args.map, "r": args.r, "region": args.region,
           "M": [M.height, M.mantissa], "log_M": M.log_float()}
    _write_text(args.output, io.dumps(out))
    return EXIT_OK


def cmd_dyn_growth(args):
    from zlab.dynamics import growth_diagnostic

    cfg = resolve_config("dyn growth", args, {"output": args.output})
    net = _net_for(cfg, args)
    rows = growth_diagnostic(args.r_values, args.map, cfg.n_samples, cfg.seed, net, cfg.params, args.region)
    out = {"config": cfg.to_dict(), "map": args.map, "rows": [dataclasses.asdict(r) for r in rows]}
    _write_text(args.output, io.dumps(out))
    return EXIT_OK


def _tree_failures(checks):
    keys = ("measure_conservation_ok", "level1_separation_ok", "sibling_separation_ok", "growth_floor_ok")
    return [k for k in keys if checks.get(k) is False]


def cmd_frac_tree(args):
    from zlab.fractal.tree import build_tree, tree_checks

    cfg = resolve_config("frac tree", args, {"output": args.output})
    net = _net_for(cfg, args)
    tree = build_tree(cfg.R0, cfg.depth, cfg.child_cap, net, cfg.params, seed=cfg.seed, n_probe=cfg.n_probe)
    checks = tree_checks(tree)
    _write_text(args.output, io.dumps(io.tree_record(tree, checks, cfg.to_dict())))
    bad = _tree_failures(checks)
    if bad:
        _witness("tree invariant checks failed", {k: checks[k] for k in bad})
        return EXIT_FAIL
    return EXIT_OK


def cmd_frac_dimension(args):
    from zlab.fractal.estimators import dimension_report
    from zlab.fractal.family import family_table
    from zlab.render import density_image

    outputs = {"output": args.output, "pgm": args.pgm, "csv": args.csv}
    cfg = resolve_config("frac dimension", args, outputs)
    net = _net_for(cfg, args)
    report, tree = dimension_report(cfg.rho, cfg.depth, cfg.child_cap, cfg.seed, cfg.params, cfg.R0,
                                    cfg.r_max, cfg.n_probe, net=net, return_tree=True)
    report = {"config": cfg.to_dict(), **report}
    _write_text(args.output, io.dumps(report))
    if args.pgm:
        pts = family_table("H", cfg.R0, net, tree.c2).points()
        io.write_pgm(args.pgm, density_image(pts))
        _write_text(args.pgm + ".json", io.dumps({"config": cfg.to_dict(), "image": "level-1 log density, (x1, x2)"}))
    if args.csv:
        rows = []
        e = report["estimators"]
        if e["box_count"].get("scales"):
            rows += [["box_count", s, c] for s, c in zip(e["box_count"]["scales"], e["box_count"]["counts"])]
        rows += [["u_count", t, c] for t, c in zip(e["u_count"]["t"], e["u_count"]["counts"])]
        io.write_csv(args.csv, ("estimator", "scale", "count"), rows, cfg.to_dict())
    bad = _tree_failures(report["checks"])
    if bad:
        _witness("tree invariant checks failed", {k: report["checks"][k] for k in bad})
        return EXIT_FAIL
    return EXIT_OK


def cmd_render_slice(args):
    from zlab.render import SliceSpec, render_slice

    cfg = resolve_config("render slice", args, {"output": args.output})
    axis, value = SliceSpec.parse_plane(args.plane)
    spec = SliceSpec(axis, value, tuple(args.window), args.size[0], args.size[1], cfg.horizon, cfg.R)
    net = _net_for(cfg, args)
    img = render_slice(spec, net, cfg.params)
    io.write_pgm(args.output, img)
    meta = {"config": cfg.to_dict(), "slice": dataclasses.asdict(spec)}
    _write_text(args.output + ".json", io.dumps(meta))
    return EXIT_OK


# ---------------------------------------------------------------- parser


def _common(p, net_opts=True):
    p.add_argument("--config", help="JSON file of settings (flags win)")
    p.add_argument("--rho", type=float)
    p.add_argument("--r-max", dest="r_max", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--L", dest="L", type=float)
    p.add_argument("--R-cert", dest="R_cert", type=float)
    if net_opts:
        p.add_argument("--net", help="NETv1 cache to use instead of building a net")
        p.add_argument("--trust", action="store_true", help="skip re-validation of --net")


def build_parser():
    parser = argparse.ArgumentParser(prog="zlab", description=__doc__.splitlines()[0])
    groups = parser.add_subparsers(dest="group", required=True)

    net = groups.add_parser("net", help="separated nets").add_subparsers(dest="cmd", required=True)
    p = net.add_parser("build", help="build a net and write a NETv1 cache")
    _common(p, net_opts=False)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_net_build)
    p = net.add_parser("verify", help="re-validate a NETv1 cache")
    p.add_argument("path")
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.add_argument("--samples", dest="n_samples", type=int)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_net_verify)

    dyn = groups.add_parser("dyn", help="orbits and growth").add_subparsers(dest="cmd", required=True)
    p = dyn.add_parser("classify", help="fast-escape classification to CSV")
    _common(p)
    p.add_argument("--R", dest="R", type=float)
    p.add_argument("--horizon", type=int)
    p.add_argument("--point", nargs=3, type=float, action="append", metavar=("X1", "X2", "X3"))
    p.add_argument("--points", help="CSV file with columns x1,x2,x3")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_dyn_classify)
    for name, fn in (("maxmod", cmd_dyn_maxmod), ("growth", cmd_dyn_growth)):
        p = dyn.add_parser(name)
        _common(p)
        p.add_argument("--map", choices=("f", "H", "G", "Z"), default="f")
        p.add_argument("--samples", dest="n_samples", type=int)
        p.add_argument("--region", choices=("offOmega",), default=None)
        p.add_argument("-o", "--output")
        if name == "maxmod":
            p.add_argument("--r", type=float, required=True)
        else:
            p.add_argument("--r-values", dest="r_values", type=float, nargs="+", required=True)
        p.set_defaults(func=fn)

    frac = groups.add_parser("frac", help="nested cells and dimension").add_subparsers(dest="cmd", required=True)
    for name, fn in (("tree", cmd_frac_tree), ("dimension", cmd_frac_dimension)):
        p = frac.add_parser(name)
        _common(p)
        p.add_argument("--R0", dest="R0", type=float)
        p.add_argument("--depth", type=int)
        p.add_argument("--child-cap", dest="child_cap", type=int)
        p.add_argument("--n-probe", dest="n_probe", type=int)
        p.add_argument("-o", "--output")
        if name == "dimension":
            p.add_argument("--pgm")
            p.add_argument("--csv")
        p.set_defaults(func=fn)

    render = groups.add_parser("render", help="images").add_subparsers(dest="cmd", required=True)
    p = render.add_parser("slice", help="escape-index slice as binary PGM")
    _common(p)
    p.add_argument("--plane", default="x2=0")
    p.add_argument("--window", type=float, nargs=4, default=[-2.0, 2.0, 0.0, 20.0], metavar=("U0", "U1", "V0", "V1"))
    p.add_argument("--size", type=int, nargs=2, default=[256, 256], metavar=("W", "H"))
    p.add_argument("--horizon", type=int)
    p.add_argument("--R", dest="R", type=float)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_render_slice)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        return args.func(args)
    except (ConfigError, OutOfRangeError) as exc:
        _witness(f"configuration error: {exc}")
        return EXIT_CONFIG
    except VerificationError as exc:
        _witness(str(exc), exc.witness)
        return EXIT_FAIL
    except (FormatError, DomainError, ZlabError, OSError) as exc:
        _witness(f"{type(exc).__name__}: {exc}")
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
