"""Persistence: NETv1 net caches, TREEv1 tree JSON, CSV tables and binary PGM."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import mpmath as mp
import numpy as np

from zlab.errors import FormatError, VerificationError
from zlab.fractal import hp
from zlab.net import TIE_BREAK, Net, NetConfig, separation_violations

NET_MAGIC = "NETv1"
TREE_MAGIC = "TREEv1"


def _finite(v):
    v = float(v)
    return v if math.isfinite(v) else None


def to_jsonable(obj):
    """Plain JSON types: numpy scalars and arrays unwrapped, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _finite(obj)
    return obj


def dumps(obj):
    """Canonical JSON: sorted keys, shortest round-trip floats, no NaN."""
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=1, allow_nan=False) + "\n"


# ---------------------------------------------------------------- nets


def format_net(net):
    c = net.config
    head = f"{NET_MAGIC} rho={c.rho!r} beta={c.beta!r} r_max={c.r_max!r} count={len(net)} tie={c.tie_break}"
    body = "".join(f"{a} {b}\n" for a, b in net.points.tolist())
    return head + "\n" + body


def save_net(net, path, config=None):
    """Write the cache; a resolved run config goes to the sidecar ``<path>.json``."""
    with open(path, "w", encoding="ascii") as fh:
        fh.write(format_net(net))
    if config is not None:
        with open(str(path) + ".json", "w", encoding="utf-8") as fh:
            fh.write(dumps({"config": config}))


def parse_net(text):
    """Net from NETv1 text; structural checks only."""
    lines = text.split("\n")
    head = lines[0].split(" ")
    if not head or head[0] != NET_MAGIC:
        raise FormatError(f"not a {NET_MAGIC} file (header {lines[0][:20]!r})")
    fields = {}
    for tok in head[1:]:
        key, sep, val = tok.partition("=")
        if not sep:
            raise FormatError(f"bad header token {tok!r}")
        fields[key] = val
    missing = {"rho", "beta", "r_max", "count", "tie"} - set(fields)
    if missing:
        raise FormatError(f"net header lacks {sorted(missing)}")
    try:
        rho, beta, r_max = float(fields["rho"]), float(fields["beta"]), float(fields["r_max"])
        count = int(fields["count"])
    except ValueError as exc:
        raise FormatError(f"bad net header: {exc}") from exc
    if fields["tie"] != TIE_BREAK:
        raise FormatError(f"unsupported tie-break rule {fields['tie']!r}")
    body = lines[1:]
    if body and body[-1] == "":
        body = body[:-1]
    else:
        raise FormatError("truncated net file: missing final newline")
    if len(body) != count:
        raise FormatError(f"truncated net file: header says {count} points, found {len(body)}")
    try:
        rows = [ln.split(" ") for ln in body]
        if any(len(r) != 2 for r in rows):
            raise ValueError("expected two integers per line")
        pts = np.array([[int(a), int(b)] for a, b in rows], dtype=np.int64).reshape(-1, 2)
    except ValueError as exc:
        raise FormatError(f"bad point line: {exc}") from exc
    net = Net(NetConfig(rho, r_max, fields["tie"]), pts)
    if abs(net.beta - beta) > 1e-12:
        raise FormatError(f"header beta {beta} does not match (3 - rho)/2 = {net.beta}")
    return net


def validate_net(net):
    """Exact invariants of a loaded net; raises VerificationError with a witness."""
    pts = net.points
    if len(pts) == 0 or pts[0].tolist() != [0, 0]:
        raise VerificationError("first net point is not the origin", witness=pts[:1].tolist())
    odd = pts[(pts[:, 0] + pts[:, 1]) % 2 != 0]
    if len(odd):
        raise VerificationError("odd-parity net point", witness=odd[0].tolist())
    if net.is_singleton:
        if len(pts) != 1:
            raise VerificationError("rho = 1 net must be the single point (0, 0)", witness=pts[1].tolist())
        return
    bad = separation_violations(pts, net.beta, limit=1)
    if bad:
        raise VerificationError("separation violated", witness=list(bad[0]))


def load_net(path, trust=False):
    """Load a NETv1 cache, re-validating its invariants unless ``trust``."""
    try:
        with open(path, encoding="ascii") as fh:
            text = fh.read()
    except UnicodeDecodeError as exc:
        raise FormatError(f"net file is not ASCII: {exc}") from exc
    net = parse_net(text)
    if not trust:
        validate_net(net)
    return net


# ---------------------------------------------------------------- trees


def anchor_record(a, virtual, dps=None):
    """JSON form of an anchor.  Virtual anchors keep scale-free coordinates."""
    if not virtual:
        return {"s": [a.s[0], a.s[1]], "k": a.k, "tag": a.map_tag}
    with mp.workdps(dps or 50):
        ke = hp.k_eta(a.k)
        tv = mp.mpf(a.k)
        return {
            "tag": a.map_tag,
            "s_hat": [float(mp.mpf(a.s[0]) / ke), float(mp.mpf(a.s[1]) / ke)],
            "parity": [a.s[0] % 2, a.s[1] % 2],
            "log10_k": float(mp.log10(tv)),
            "k_eta_digits": int(mp.floor(mp.log10(ke))) + 1,
        }


def node_record(v, ident, parent):
    word = []
    for j, a in enumerate(v.branch_word):
        word.append(anchor_record(a, virtual=j > 0, dps=v._dps))
    return {
        "id": ident,
        "parent": parent,
        "level": v.level,
        "word": word,
        "t": [v.t.height, v.t.mantissa],
        "anchor_preimage": [float(c) for c in v.anchor_preimage],
        "log_scale": v.log_scale,
        "frame": [float(c) for c in np.asarray(v.frame).ravel()],
        "log_diam": v.log_diam,
        "log_meas": v.log_meas,
        "diam_est": v.diam_est,
        "meas_est": v.meas_est,
        "measure": v.measure,
        "log_cell_measure": _finite(v.log_cell_measure),
        "log_family": _finite(v.log_family),
        "family_exact": v.family_exact,
        "sterile": bool(v.sterile),
        "virtual": bool(v.virtual),
        "orbit": [[o.height, o.mantissa] for o in v.orbit],
        "diagnostics": list(v.diagnostics),
    }


def tree_record(tree, checks=None, config=None):
    nodes = []
    stack = [(tree.root, None)]
    while stack:
        v, parent = stack.pop(0)
        ident = len(nodes)
        nodes.append(node_record(v, ident, parent))
        stack.extend((c, ident) for c in v.children)
    cfg = tree.config
    return {
        "format": TREE_MAGIC,
        "config": config or {},
        "tree_config": {"R0": cfg.R0, "depth": cfg.depth, "child_cap": cfg.child_cap,
                        "seed": cfg.seed, "n_probe": cfg.n_probe, "region": cfg.region},
        "C2": tree.c2,
        "density_alpha": tree.density_alpha,
        "checks": checks,
        "nodes": nodes,
    }


@dataclass
class TreeRecord:
    """A loaded TREEv1 document: nodes as plain dicts, in breadth-first order."""

    tree_config: dict
    C2: float
    density_alpha: float
    nodes: list
    config: dict = field(default_factory=dict)
    checks: dict | None = None

    def to_dict(self):
        return {"format": TREE_MAGIC, "config": self.config, "tree_config": self.tree_config,
                "C2": self.C2, "density_alpha": self.density_alpha, "checks": self.checks,
                "nodes": self.nodes}

    def validate(self, rtol=1e-9):
        """Root measure 1 and per-node conservation among non-sterile children."""
        if not self.nodes or self.nodes[0]["parent"] is not None:
            raise VerificationError("tree has no root node")
        if abs(self.nodes[0]["measure"] - 1.0) > rtol:
            raise VerificationError("root measure is not 1", witness=self.nodes[0]["measure"])
        kids = {}
        for n in self.nodes[1:]:
            kids.setdefault(n["parent"], []).append(n)
        for pid, ch in kids.items():
            par = self.nodes[pid]
            tot = sum(c["measure"] for c in ch if not c["sterile"])
            if any(not c["sterile"] for c in ch) and abs(tot - par["measure"]) > rtol * max(par["measure"], 1e-300):
                raise VerificationError("measure not conserved", witness=[pid, tot, par["measure"]])


def save_tree(record, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(record))


def load_tree(path, trust=False):
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"tree file is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format") != TREE_MAGIC:
        raise FormatError(f"not a {TREE_MAGIC} document")
    try:
        rec = TreeRecord(doc["tree_config"], doc["C2"], doc["density_alpha"], doc["nodes"],
                         doc.get("config", {}), doc.get("checks"))
    except KeyError as exc:
        raise FormatError(f"tree document lacks {exc}") from exc
    if not trust:
        rec.validate()
    return rec


# ---------------------------------------------------------------- tables and images

CLASSIFY_COLUMNS = ("x1", "x2", "x3", "verdict", "m0", "loglog_final")


def write_csv(path, columns, rows, config=None):
    """CSV with a leading '# config {...}' comment line."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if config is not None:
            fh.write("# config " + json.dumps(config, sort_keys=True) + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow(["" if v is None else (repr(float(v)) if isinstance(v, float) else v) for v in r])


def read_csv(path):
    """(config, header, rows) of a CSV written by :func:`write_csv`."""
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    config = None
    if lines and lines[0].startswith("# config "):
        config = json.loads(lines[0][len("# config "):])
        lines = lines[1:]
    reader = list(csv.reader(lines))
    if not reader:
        raise FormatError("empty CSV table")
    return config, reader[0], reader[1:]


def pgm_bytes(image):
    img = np.asarray(image)
    if img.ndim != 2:
        raise FormatError("PGM image must be 2-D")
    if img.min(initial=0) < 0 or img.max(initial=0) > 255:
        raise FormatError("PGM pixel values must lie in 0..255")
    h, w = img.shape
    return f"P5 {w} {h} 255\n".encode("ascii") + img.astype(np.uint8).tobytes(order="C")


def write_pgm(path, image):
    with open(path, "wb") as fh:
        fh.write(pgm_bytes(image))


def read_pgm(path):
    with open(path, "rb") as fh:
        data = fh.read()
    nl = data.find(b"\n")
    head = data[:nl].split() if nl >= 0 else []
    if len(head) != 4 or head[0] != b"P5" or head[3] != b"255":
        raise FormatError("not a binary PGM with header 'P5 <w> <h> 255'")
    w, h = int(head[1]), int(head[2])
    body = data[nl + 1:]
    if len(body) != w * h:
        raise FormatError(f"PGM body has {len(body)} bytes, expected {w * h}")
    return np.frombuffer(body, dtype=np.uint8).reshape(h, w)
