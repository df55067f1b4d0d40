import json
import subprocess
import sys

import numpy as np
import pytest

from pumpep.cli import AUDIT_HEADER, main, parse_range
from pumpep.ep import LOCUS_HEADER, SPLITTING_HEADER
from pumpep.oracle import REPORT_HEADER
from pumpep.spectrum import SPECTRUM_HEADER


def run(tmp_path, *argv, name="out.csv"):
    out = tmp_path / name
    code = main([*argv, "--out", str(out)])
    return code, (out.read_text() if out.exists() else "")


def rows(text):
    lines = text.strip().splitlines()
    return lines[0], [ln.split(",") for ln in lines[1:]]


class TestRange:
    def test_inclusive(self):
        np.testing.assert_array_equal(parse_range("-1:0:3"), [-1, -0.5, 0])

    def test_single_point(self):
        np.testing.assert_array_equal(parse_range("1:1:1"), [1.0])

    @pytest.mark.parametrize("bad", ["1:2", "a:b:c", "0:1:0", "0:1:1"])
    def test_bad(self, bad):
        import argparse

        with pytest.raises(argparse.ArgumentTypeError):
            parse_range(bad)


class TestSpectrum:
    def test_row_count_and_header(self, tmp_path):
        code, text = run(tmp_path, "spectrum", "--gamma-cor", "0", "--d0", "-1:0:2001")
        assert code == 0
        header, body = rows(text)
        assert header == SPECTRUM_HEADER
        assert len(body) == 2001

    def test_deterministic_bytes(self, tmp_path):
        argv = ("spectrum", "--gamma-cor", "1.5e-3", "--d0", "-1:0:201")
        _, a = run(tmp_path, *argv, name="a.csv")
        _, b = run(tmp_path, *argv, name="b.csv")
        assert a == b

    def test_pair_merges_inside(self, tmp_path):
        _, text = run(tmp_path, "spectrum", "--gamma-cor", "1.5e-3", "--d0", "-1:0:401")
        _, body = rows(text)
        im2 = np.array([float(r[4]) for r in body])
        pair = im2 != 0
        assert pair[0] and not pair[-1]
        assert np.count_nonzero(np.diff(pair.astype(int))) == 1

    def test_manifest_and_svg(self, tmp_path):
        svg = tmp_path / "s.svg"
        code, _ = run(tmp_path, "spectrum", "--d0", "-1:0:11", "--svg", str(svg))
        assert code == 0
        assert svg.read_text().startswith("<?xml")
        m = json.loads((tmp_path / "out.csv.manifest.json").read_text())
        assert m["subcommand"] == "spectrum"
        assert m["grids"]["d0"] == {"lo": -1.0, "hi": 0.0, "count": 11}
        assert m["params"]["omega_R"] == 1e-5
        assert "tool_version" in m and "timestamp" in m

    def test_stdout(self, capsys):
        assert main(["spectrum", "--d0", "-0.5:-0.4:3"]) == 0
        out = capsys.readouterr().out
        assert out.splitlines()[0] == SPECTRUM_HEADER and len(out.splitlines()) == 4

    def test_domain_error_exit_2(self, tmp_path, capsys):
        code, _ = run(tmp_path, "spectrum", "--d0", "-2:0:5")
        assert code == 2
        assert "error" in capsys.readouterr().err


class TestEp:
    def test_single(self, capsys):
        assert main(["ep", "--gamma-cor", "0"]) == 0
        out = capsys.readouterr().out
        d0 = float(next(ln.split()[1] for ln in out.splitlines() if ln.startswith("d0_ep")))
        assert -1 < d0 < 0
        assert "status       ep" in out

    def test_no_coupling_exit_4(self, capsys):
        assert main(["ep", "--gamma-cor", "0", "--omega-r", "0"]) == 4
        err = capsys.readouterr().err
        assert "[" in err and "]" in err

    def test_locus(self, tmp_path):
        code, text = run(tmp_path, "ep", "--locus", "0:1e-2:21")
        assert code == 0
        header, body = rows(text)
        assert header == LOCUS_HEADER
        d = [float(r[1]) for r in body]
        assert len(d) == 21 and all(b < a for a, b in zip(d, d[1:]))

    def test_splitting(self, tmp_path):
        code, text = run(tmp_path, "ep", "--splitting", "-1:0:51")
        header, body = rows(text)
        assert code == 0 and header == SPLITTING_HEADER and len(body) == 51


class TestDst:
    def test_rows(self, tmp_path):
        code, text = run(tmp_path, "dst", "--ratio", "0:2:41")
        header, body = rows(text)
        assert code == 0
        assert header == "pump_ratio,D_st,D_0,converged"
        assert len(body) == 41
        for r in body:
            ratio, d0 = float(r[0]), float(r[2])
            assert d0 == pytest.approx((ratio - 1) / (ratio + 1), abs=1e-15)

    def test_single_row(self, tmp_path):
        code, text = run(tmp_path, "dst", "--ratio", "1:1:1")
        _, body = rows(text)
        assert code == 0 and len(body) == 1 and float(body[0][2]) == 0.0


class TestOracle:
    def test_correlation_ratio(self, tmp_path):
        code, text = run(tmp_path, "oracle", "--dissipator", "cor", "--rate", "1e-3")
        header, body = rows(text)
        assert code == 0 and header == REPORT_HEADER
        ratio = next(r for r in body if r[1] == "ratio_s_over_phi")
        assert float(ratio[2]) == pytest.approx(4.0, rel=5e-3)

    def test_dephasing_ratio(self, tmp_path):
        _, text = run(tmp_path, "oracle", "--dissipator", "ph", "--rate", "1e-3")
        ratio = next(r for r in rows(text)[1] if r[1] == "ratio_s_over_phi")
        assert float(ratio[2]) == pytest.approx(2.0, rel=5e-3)

    def test_cavity(self, tmp_path):
        _, text = run(tmp_path, "oracle", "--dissipator", "cavity", "--rate", "5e-5")
        n_row = next(r for r in rows(text)[1] if r[1] == "n")
        assert float(n_row[2]) == pytest.approx(1e-4, rel=5e-3)

    def test_mismatch_exit_5(self, monkeypatch, tmp_path):
        import pumpep.oracle as oracle

        monkeypatch.setattr(
            oracle, "_expected_rates", lambda name, rate: [("sigma1dag_sigma2", 3 * rate)]
        )
        code, _ = run(tmp_path, "oracle", "--dissipator", "cor", "--rate", "1e-3")
        assert code == 5

    def test_unknown_dissipator_exit_2(self, capsys):
        assert main(["oracle", "--dissipator", "laser", "--rate", "1e-3"]) == 2


class TestAudit:
    def test_full_absorption_zero(self, tmp_path):
        code, text = run(tmp_path, "audit", "--d0", "-1:-1:1")
        header, body = rows(text)
        assert code == 0 and header == AUDIT_HEADER
        assert {r[1] for r in body} == {"closed-form", "exact-solve"}
        for r in body:
            assert all(float(v) == 0 for v in r[2:])

    def test_default_point(self, tmp_path):
        code, text = run(tmp_path, "audit")
        _, body = rows(text)
        by = {r[1]: [float(v) for v in r[2:]] for r in body}
        exact, closed = by["exact-solve"], by["closed-form"]
        assert max(abs(v) for v in exact[3:6]) < 1e-12
        assert max(abs(v) for v in closed[3:6]) > 1e-12
        # forced phi relation holds for both triples
        assert exact[6] < 1e-12 and closed[6] < 1e-12


class TestUsage:
    def test_argparse_errors_exit_2(self):
        r = subprocess.run([sys.executable, "-m", "pumpep.cli", "spectrum", "--d0", "oops"], capture_output=True)
        assert r.returncode == 2

    def test_config_precedence(self, tmp_path, capsys):
        cfg = tmp_path / "p.cfg"
        cfg.write_text("# override\ngamma_cor = 2e-3\nomega_r = 0\n")
        # config removes the coupling, the flag restores it
        assert main(["ep", "--config", str(cfg)]) == 4
        capsys.readouterr()
        assert main(["ep", "--config", str(cfg), "--omega-r", "1e-5"]) == 0
        assert "gamma_cor    0.002" in capsys.readouterr().out
