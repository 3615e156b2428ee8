import json

import numpy as np
import pytest

from zlab import io
from zlab.cli import main
from zlab.dynamics import BOUNDED, CERTIFIED
from zlab.errors import FormatError, VerificationError
from zlab.fractal.tree import build_tree, tree_checks
from zlab.net import Net, NetConfig, build_net


@pytest.fixture(scope="module")
def small_net():
    return build_net(NetConfig(2.0, r_max=200.0))


class TestNetFiles:
    def test_round_trip(self, small_net, tmp_path):
        p = tmp_path / "n.net"
        io.save_net(small_net, p)
        back = io.load_net(p)
        assert np.array_equal(back.points, small_net.points)
        assert back.config == small_net.config

    def test_header(self, small_net, tmp_path):
        p = tmp_path / "n.net"
        io.save_net(small_net, p, config={"rho": 2.0})
        head = p.read_text().split("\n")[0]
        assert head == f"NETv1 rho=2.0 beta=0.5 r_max=200.0 count={len(small_net)} tie=norm2-lex"
        assert json.loads((tmp_path / "n.net.json").read_text())["config"] == {"rho": 2.0}

    def test_truncated(self, small_net, tmp_path):
        p = tmp_path / "n.net"
        io.save_net(small_net, p)
        text = p.read_text()
        p.write_text(text[: len(text) // 2])
        with pytest.raises(FormatError):
            io.load_net(p)

    @pytest.mark.parametrize("bad", ["XYZ rho=2\n", "NETv1 rho=2.0 beta=0.5 r_max=200.0 count=1 tie=norm2-lex\n0 x\n",
                                     "NETv1 rho=2.0 beta=0.7 r_max=200.0 count=1 tie=norm2-lex\n0 0\n"])
    def test_bad_text(self, bad):
        with pytest.raises(FormatError):
            io.parse_net(bad)

    def test_validation_witness(self, small_net):
        pts = small_net.points.copy()
        pts[2] = [1, -1]
        with pytest.raises(VerificationError) as ei:
            io.validate_net(Net(small_net.config, pts))
        assert ei.value.witness is not None

    def test_trust_skips_validation(self, small_net, tmp_path):
        pts = small_net.points.copy()
        pts[1] = [2, 0]
        p = tmp_path / "bad.net"
        io.save_net(Net(small_net.config, pts), p)
        with pytest.raises(VerificationError):
            io.load_net(p)
        assert len(io.load_net(p, trust=True)) == len(pts)


class TestTreeFiles:
    def test_round_trip(self, nets_frac, params, tmp_path):
        tree = build_tree(1000.0, 2, 3, nets_frac[2.5], params, n_probe=64)
        rec = io.tree_record(tree, tree_checks(tree, n_probe=64), {"seed": 0})
        p = tmp_path / "t.json"
        io.save_tree(rec, p)
        back = io.load_tree(p)
        assert back.to_dict() == json.loads(io.dumps(rec))
        ids = [n["id"] for n in back.nodes]
        assert ids == list(range(len(tree.nodes())))
        flat = tree.nodes()
        for n in back.nodes:
            assert n["measure"] == flat[n["id"]].measure
        virt = [n for n in back.nodes if n["level"] == 2]
        assert virt and "s_hat" in virt[0]["word"][1]

    def test_tamper(self, nets_frac, params, tmp_path):
        tree = build_tree(1000.0, 1, 3, nets_frac[2.5], params, n_probe=64)
        rec = io.tree_record(tree)
        rec["nodes"][1]["measure"] += 0.1
        p = tmp_path / "t.json"
        io.save_tree(rec, p)
        with pytest.raises(VerificationError):
            io.load_tree(p)
        io.load_tree(p, trust=True)

    def test_not_json(self, tmp_path):
        p = tmp_path / "t.json"
        p.write_text("{nope")
        with pytest.raises(FormatError):
            io.load_tree(p)


class TestTables:
    def test_csv(self, tmp_path):
        p = tmp_path / "a.csv"
        io.write_csv(p, ("a", "b"), [[1, 0.1], [2, None]], {"k": 1})
        cfg, head, rows = io.read_csv(p)
        assert cfg == {"k": 1} and head == ["a", "b"] and rows == [["1", "0.1"], ["2", ""]]

    def test_pgm(self, tmp_path):
        img = np.arange(20 * 16, dtype=np.uint8).reshape(16, 20)
        p = tmp_path / "x.pgm"
        io.write_pgm(p, img)
        assert p.read_bytes().startswith(b"P5 20 16 255\n")
        assert np.array_equal(io.read_pgm(p), img)

    def test_pgm_range(self):
        with pytest.raises(FormatError):
            io.pgm_bytes(np.full((2, 2), 300))

    def test_dumps_nan(self):
        assert json.loads(io.dumps({"x": float("nan"), "y": np.float64(1.5)})) == {"x": None, "y": 1.5}


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


class TestCLI:
    def test_net_build_verify(self, tmp_path, capsys):
        p = tmp_path / "n.net"
        code, out, _ = run(["net", "build", "--rho", 2, "--r-max", 300, "-o", p], capsys)
        assert code == 0 and json.loads(out)["config"]["r_max"] == 300
        code, out, _ = run(["net", "verify", p, "--samples", 200], capsys)
        assert code == 0 and json.loads(out)["report"]["exact_ok"]

    def test_corrupted_net_exit_1(self, tmp_path, capsys):
        p = tmp_path / "n.net"
        run(["net", "build", "--rho", 2, "--r-max", 300, "-o", p], capsys)
        lines = p.read_text().split("\n")
        lines[2] = "2 0"
        p.write_text("\n".join(lines))
        code, _, err = run(["net", "verify", p], capsys)
        assert code == 1 and json.loads(err)["witness"] is not None

    def test_truncated_exit_1(self, tmp_path, capsys):
        p = tmp_path / "n.net"
        run(["net", "build", "--rho", 2, "--r-max", 300, "-o", p], capsys)
        p.write_text(p.read_text()[:-3])
        assert run(["net", "verify", p], capsys)[0] == 1

    def test_config_errors_exit_2(self, tmp_path, capsys):
        assert run(["net", "build", "--rho", 3.5, "-o", tmp_path / "n"], capsys)[0] == 2
        assert run(["nosuch"], capsys)[0] == 2
        cfg = tmp_path / "c.json"
        cfg.write_text('{"bogus": 1}')
        assert run(["dyn", "classify", "--config", cfg, "--point", 0, 0, 50], capsys)[0] == 2

    def test_flags_win(self, tmp_path, capsys):
        cfg = tmp_path / "c.json"
        cfg.write_text('{"R": 20, "horizon": 3}')
        code, out, _ = run(["dyn", "classify", "--config", cfg, "--R", 10, "--point", 0, 0, 50], capsys)
        assert code == 0
        conf = json.loads(out.splitlines()[0][len("# config "):])
        assert conf["R"] == 10 and conf["horizon"] == 3

    def test_classify_csv(self, tmp_path, capsys):
        o = tmp_path / "c.csv"
        code, _, _ = run(["dyn", "classify", "--horizon", 2, "--point", 0, 0, 50, "--point", 5, 5, 0, "-o", o], capsys)
        cfg, head, rows = io.read_csv(o)
        assert code == 0 and tuple(head) == io.CLASSIFY_COLUMNS
        assert [r[3] for r in rows] == [CERTIFIED, BOUNDED]
        assert cfg["command"] == "dyn classify"

    def test_maxmod_growth(self, capsys):
        code, out, _ = run(["dyn", "maxmod", "--map", "Z", "--r", 6, "--samples", 1000], capsys)
        assert code == 0 and json.loads(out)["log_M"] >= 6 - 1e-9
        code, out, _ = run(["dyn", "growth", "--map", "Z", "--r-values", 20, 40, "--samples", 1000], capsys)
        assert code == 0 and len(json.loads(out)["rows"]) == 2

    def test_frac_tree(self, tmp_path, capsys):
        o = tmp_path / "t.json"
        code, _, _ = run(["frac", "tree", "--rho", 2.5, "--R0", 1000, "--depth", 1, "--child-cap", 4,
                          "--n-probe", 64, "-o", o], capsys)
        assert code == 0
        rec = io.load_tree(o)
        assert rec.config["child_cap"] == 4 and len(rec.nodes) == 5

    def test_render_slice(self, tmp_path, capsys):
        o = tmp_path / "s.pgm"
        code, _, _ = run(["render", "slice", "--plane", "x2=0", "--window", -2, 2, -4, 20, "--size", 33, 24,
                          "--horizon", 4, "-o", o], capsys)
        assert code == 0
        assert o.read_bytes().startswith(b"P5 33 24 255\n")
        img = io.read_pgm(o)
        # bottom rows lie at x3 < 0, far below the escape threshold
        assert img[-1].max() == 0
        # the centre column is the x3 axis; its top pixels certify at m0 = 0
        assert img[0, 16] == 255
        meta = json.loads((tmp_path / "s.pgm.json").read_text())
        assert meta["slice"]["width"] == 33

    def test_render_bad_size(self, tmp_path, capsys):
        assert run(["render", "slice", "--size", 8, 8, "-o", tmp_path / "s.pgm"], capsys)[0] == 2

    def test_net_flag(self, tmp_path, capsys):
        p = tmp_path / "n.net"
        run(["net", "build", "--rho", 2, "--r-max", 1000, "-o", p], capsys)
        code, out, _ = run(["dyn", "classify", "--net", p, "--point", 0, 0, 50], capsys)
        assert code == 0 and CERTIFIED in out
