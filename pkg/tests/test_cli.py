import json
import subprocess
import sys

import numpy as np
import pytest

from conftest import sector_levels
from rabispec import cli


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


class TestParsing:
    @pytest.mark.parametrize("text,value", [
        ("5i", 5j), ("-0.5i", -0.5j), ("i", 1j), ("0.3", 0.3), ("0.2+0.1i", 0.2 + 0.1j),
        ("1e-3-2e-2i", 1e-3 - 2e-2j), ("3j", 3j), ("-i", -1j),
    ])
    def test_complex(self, text, value):
        assert cli.parse_complex(text) == value

    @pytest.mark.parametrize("text", ["", "abc", "1+2k"])
    def test_bad_complex(self, text):
        with pytest.raises(cli.ConfigError):
            cli.parse_complex(text)

    def test_fifteen_digits(self):
        assert cli.fmt(1 / 3) == "0.333333333333333"
        assert cli.fmt(True) == "true" and cli.fmt(7) == "7"


class TestConfigErrors:
    def test_missing_coupling(self, capsys):
        code, _, err = run(capsys, "spectrum", "--delta", "0.7", "--x-max", "3")
        assert code == 2 and "--g" in err

    def test_negative_coupling(self, capsys):
        assert run(capsys, "spectrum", "--g", "-1", "--delta", "0.7", "--x-max", "3")[0] == 2

    def test_inverted_range(self, capsys):
        code, _, err = run(capsys, "spectrum", "--g", "1", "--delta", "0.7",
                           "--x-min", "3", "--x-max", "1")
        assert code == 2 and "x-min" in err

    def test_unknown_flag(self, capsys):
        assert run(capsys, "spectrum", "--bogus")[0] == 2

    def test_validate_outside_d0(self, capsys):
        code, _, err = run(capsys, "validate", "--g", "1", "--delta", "0.7", "--x", "0.5",
                           "--z0", "1.5")
        assert code == 2 and "D0" in err

    def test_parity_with_bias(self, capsys):
        assert run(capsys, "spectrum", "--g", "1", "--delta", "0.7", "--epsilon", "0.2",
                   "--parity", "+", "--x-max", "3")[0] == 2

    def test_extended_precision_trace(self, capsys):
        code, _, err = run(capsys, "gtrace", "--g", "1", "--delta", "0.7", "--x-min", "0.5",
                           "--x-max", "0.6", "--samples", "2", "--dps", "20", "--trunc", "500",
                           "--z0", "5i")
        assert code == 0

    def test_environment_override(self, capsys, monkeypatch):
        monkeypatch.setenv("RABISPEC_G", "1")
        monkeypatch.setenv("RABISPEC_DELTA", "0.7")
        code, out, _ = run(capsys, "oracle", "--x-max", "1")
        assert code == 0 and out.startswith("index,x,energy,parity")

    def test_flag_beats_environment(self, capsys, monkeypatch):
        monkeypatch.setenv("RABISPEC_G", "5")
        code, out, _ = run(capsys, "oracle", "--g", "1", "--delta", "0.7", "--x-max", "1",
                           "--format", "json")
        assert json.loads(out)["g"] == 1.0


class TestSpectrum:
    def test_table_matches_oracle(self, capsys):
        code, out, _ = run(capsys, "spectrum", "--g", "1", "--delta", "0.7", "--parity", "both",
                           "--x-min", "0", "--x-max", "12")
        assert code == 0
        cols, rows = cli.read_table(out)
        assert cols == cli.LEVEL_COLUMNS
        ref = np.sort(np.concatenate([sector_levels(1.0, 0.7, s) for s in "+-"]))
        ref = ref[(ref > 0) & (ref < 12)]
        got = np.array([r["x"] for r in rows])
        assert len(got) == len(ref) and np.abs(got - ref).max() < 1e-8
        assert [r["index"] for r in rows] == list(range(len(rows)))

    def test_without_splitting(self, capsys):
        code, out, err = run(capsys, "spectrum", "--g", "1", "--delta", "0", "--x-max", "12")
        assert code == 0
        assert out.strip() == ",".join(cli.LEVEL_COLUMNS)
        assert "exceptional" in err

    def test_fig1_window(self, capsys):
        code, out, _ = run(capsys, "spectrum", "--g", "1", "--delta", "0.7", "--parity", "+",
                           "--x-min", "70", "--x-max", "72", "--z0", "5i")
        assert code == 0
        energies = [r["energy"] for r in cli.read_table(out)[1]]
        assert min(abs(e - 70.00462935) for e in energies) < 1e-6

    def test_json_round_trip(self, capsys, tmp_path):
        path = tmp_path / "levels.json"
        run(capsys, "spectrum", "--g", "0.7", "--delta", "0.4", "--x-max", "5",
            "--format", "json", "--out", str(path))
        first = path.read_text()
        code, again, _ = run(capsys, "convert", str(path), "--format", "json")
        assert code == 0 and again == first
        code, as_csv, _ = run(capsys, "convert", str(path), "--format", "csv")
        csv_path = tmp_path / "levels.csv"
        csv_path.write_text(as_csv)
        code, back, _ = run(capsys, "convert", str(csv_path), "--format", "json")
        assert json.loads(back)["rows"] == json.loads(first)["rows"]


class TestTrace:
    def test_fig1_trace(self, capsys):
        code, out, _ = run(capsys, "gtrace", "--g", "1", "--delta", "0.7", "--z0", "5i",
                           "--x-min", "70.5", "--x-max", "71.5", "--samples", "400")
        assert code == 0
        cols, rows = cli.read_table(out)
        assert cols == cli.TRACE_COLUMNS and len(rows) == 400
        near = [r for r in rows if 70.99 < r["x"] < 71.02 and r["order_used"] > 0]
        re_sign = {np.sign(r["re"]) for r in near}
        im_sign = {np.sign(r["im"]) for r in near}
        assert re_sign == {-1, 1} and im_sign == {-1, 1}
        assert not any(r["converged"] for r in rows)

    def test_real_axis_trace_is_real(self, capsys):
        code, out, _ = run(capsys, "gtrace", "--g", "1", "--delta", "0.7", "--z0", "0",
                           "--x-min", "0.1", "--x-max", "5.9", "--samples", "50")
        rows = cli.read_table(out)[1]
        assert all(r["im"] == 0 for r in rows)

    def test_reduction_identity(self, capsys):
        base = ["--g", "0.7", "--delta", "0.4", "--x-min", "0.15", "--x-max", "5.85",
                "--samples", "40"]
        eps = cli.read_table(run(capsys, "gtrace", "--epsilon", "0", *base)[1])[1]
        plus = cli.read_table(run(capsys, "gtrace", "--parity", "+", *base)[1])[1]
        minus = cli.read_table(run(capsys, "gtrace", "--parity", "-", *base)[1])[1]
        for e, p, m in zip(eps, plus, minus):
            prod = p["re"] * m["re"]
            assert abs(e["re"] + prod) <= 1e-12 * max(1.0, abs(prod))


class TestValidateCompare:
    def test_compare_ok(self, capsys):
        code, out, err = run(capsys, "compare", "--g", "1", "--delta", "0.7", "--x-max", "12")
        assert code == 0
        rows = cli.read_table(out)[1]
        assert all(r["status"] == "ok" for r in rows)
        assert max(r["abs_dx"] for r in rows) < 1e-8

    def test_compare_eps(self, capsys):
        code, _, err = run(capsys, "compare", "--g", "0.7", "--delta", "0.4", "--epsilon", "0.3",
                           "--x-max", "12")
        assert code == 0 and "problems=0" in err

    def test_compare_detects_mismatch(self, capsys):
        code, _, _ = run(capsys, "compare", "--g", "1", "--delta", "0.7", "--x-max", "6",
                         "--tol", "1e-20")
        assert code == 1

    def test_validate_control(self, capsys):
        code, out, _ = run(capsys, "validate", "--g", "1", "--delta", "0.7", "--x", "0.7",
                           "--z0", "0.3")
        assert code == 1
        rows = cli.read_table(out)[1]
        assert all(r["res_a"] > 1e-3 for r in rows)

    def test_validate_level(self, capsys):
        x = float(sector_levels(1.0, 0.7, "+")[3])
        code, out, _ = run(capsys, "validate", "--g", "1", "--delta", "0.7", "--parity", "+",
                           "--x", repr(x), "--z0", "0.3")
        assert code == 0


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "rabispec", "oracle", "--g", "1", "--delta",
                          "0.7", "--x-max", "2", "--nfock", "60"],
                         capture_output=True, text=True, check=False)
    assert res.returncode == 0
    assert res.stdout.splitlines()[0] == "index,x,energy,parity"
