import subprocess
import sys

import numpy as np
import pytest

from stochham.cli import main

from conftest import FIELDS, GOLDEN

KUBO = str(FIELDS / "kubo.field")
BROKEN = str(FIELDS / "broken.field")


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


class TestCheck:
    def test_hamiltonian_golden(self, capsys):
        code, out, _ = run(capsys, "check", KUBO)
        assert code == 0
        assert out == (GOLDEN / "check_kubo.txt").read_text()

    def test_broken_golden(self, capsys):
        code, out, _ = run(capsys, "check", BROKEN, "--points", 8)
        assert code == 1
        assert out == (GOLDEN / "check_broken.txt").read_text()

    def test_missing_file(self, capsys, tmp_path):
        code, _, err = run(capsys, "check", tmp_path / "missing.field")
        assert code == 2 and "error" in err

    def test_syntax_error_in_file(self, capsys, tmp_path):
        bad = tmp_path / "bad.field"
        bad.write_text("dim 1\nQD[0] = p +\nPD[0] = -q\n")
        code, _, err = run(capsys, "check", bad)
        assert code == 2 and "bad.field:2:" in err

    def test_bad_flag_value(self, capsys):
        code, _, _ = run(capsys, "check", KUBO, "--points", 0)
        assert code == 2

    def test_csv_output(self, capsys, tmp_path):
        csv = tmp_path / "res.csv"
        run(capsys, "check", KUBO, "--points", 5, "--csv", csv)
        assert len(csv.read_text().splitlines()) == 6


class TestReconstruct:
    def test_table(self, capsys, tmp_path):
        out = tmp_path / "h.csv"
        code, _, err = run(capsys, "reconstruct", KUBO, "--grid=-1:1:1", "--out", out)
        assert code == 0 and "roundtrip residual" in err
        rows = [r for r in out.read_text().splitlines() if not r.startswith("#")]
        assert rows[0] == "q0,p0,H_D,H_S0" and len(rows) == 10
        data = np.array([[float(x) for x in r.split(",")] for r in rows[1:]])
        q, p = data[:, 0], data[:, 1]
        np.testing.assert_allclose(data[:, 2], (q ** 2 + p ** 2) / 2, atol=1e-14)
        np.testing.assert_allclose(data[:, 3], (q ** 2 + p ** 2) / 4, atol=1e-14)

    def test_refuses_then_forced(self, capsys):
        code, out, err = run(capsys, "reconstruct", BROKEN)
        assert code == 1 and "refusing" in err and out == ""
        code, out, err = run(capsys, "reconstruct", BROKEN, "--force", "--grid=0:1:1")
        assert code == 0 and "forced=yes" in out
        residual = float(err.split(":")[1])
        assert residual > 0.5

    def test_singular_ray_is_runtime_error(self, capsys, tmp_path):
        f = tmp_path / "inv.field"
        f.write_text("dim 1\nQD[0] = 1/(q0-0.5)\nPD[0] = 0\n")
        code, _, err = run(capsys, "reconstruct", f, "--force", "--grid=1:1:1", "--nodes", 1)
        assert code == 3 and "lambda" in err


class TestSimulate:
    def test_several_paths(self, capsys, tmp_path):
        out = tmp_path / "traj.csv"
        code, _, _ = run(capsys, "simulate", KUBO, "--paths", 4, "--h", 0.1, "--out", out)
        assert code == 0
        files = sorted(p.name for p in tmp_path.iterdir())
        assert files == [f"traj_path{i}.csv" for i in range(4)]
        text = (tmp_path / "traj_path2.csv").read_text()
        assert "seed=0 path_index=2" in text

    def test_noise_free_matches_rotation(self, capsys, tmp_path):
        f = tmp_path / "quiet.field"
        f.write_text((FIELDS / "kubo.field").read_text().replace("param s = 0.5", "param s = 0"))
        out = tmp_path / "t.csv"
        run(capsys, "simulate", f, "--h", 1e-3, "--T", 1, "--out", out)
        last = out.read_text().splitlines()[-1].split(",")
        t, q, p = (float(x) for x in last)
        assert t == pytest.approx(1.0)
        assert max(abs(q - np.cos(1.0)), abs(p + np.sin(1.0))) <= 1e-6

    def test_bad_grid(self, capsys, tmp_path):
        code, _, _ = run(capsys, "simulate", KUBO, "--T", 1, "--h", 0.3, "--out", tmp_path / "x.csv")
        assert code == 2

    def test_bad_z0(self, capsys, tmp_path):
        code, _, err = run(capsys, "simulate", KUBO, "--z0", "1,2,3", "--out", tmp_path / "x.csv")
        assert code == 2 and "--z0" in err

    def test_divergence_exit_code(self, capsys, tmp_path):
        f = tmp_path / "blow.field"
        f.write_text("dim 1\nQD[0] = q0^3\nPD[0] = 0\n")
        code, _, _ = run(capsys, "simulate", f, "--scheme", "heun", "--h", 0.1, "--z0", "10,0",
                         "--out", tmp_path / "x.csv")
        assert code == 3


class TestVerify:
    def test_golden(self, capsys):
        code, out, _ = run(capsys, "verify", KUBO, "--paths", 3, "--h", 0.01)
        assert code == 0 and out == (GOLDEN / "verify_kubo.txt").read_text()

    def test_noncommuting_reports_skip(self, capsys):
        code, out, _ = run(capsys, "verify", FIELDS / "noncommuting.field", "--paths", 2, "--h", 0.01)
        assert code == 0
        assert "energy_check = SKIPPED" in out and "max |{H_D, H_S}|" in out

    def test_broken_fails(self, capsys, tmp_path):
        series = tmp_path / "s.csv"
        code, out, _ = run(capsys, "verify", BROKEN, "--paths", 2, "--h", 0.05, "--series", series)
        assert code == 1 and "stage = check" in out
        assert series.read_text().startswith("t,symplectic_residual,hd_drift\n")


class TestGenerate:
    def test_roundtrip_through_check(self, capsys, tmp_path):
        out = tmp_path / "g.field"
        code, text, _ = run(capsys, "generate", "--hd", "a*(q^2+p^2)/2", "--hs", "s*(q^2+p^2)/2",
                            "--param", "a=1", "--param", "s=0.5", "--label", "kubo", "--out", out)
        assert code == 0 and out.read_text() == text
        code, _, _ = run(capsys, "check", out)
        assert code == 0

    def test_bad_param(self, capsys):
        code, _, _ = run(capsys, "generate", "--hd", "q", "--param", "a")
        assert code == 2


@pytest.mark.parametrize("argv", [
    ["check", KUBO, "--seed", "3"],
    ["check", BROKEN, "--points", "16"],
    ["reconstruct", KUBO, "--grid=-1:1:0.5"],
    ["verify", KUBO, "--paths", "2", "--h", "0.05"],
    ["generate", "--hd", "q*p^2", "--hs", "sin(q)", "--hs", "p"],
])
def test_byte_identical_repeats(argv):
    cmd = [sys.executable, "-m", "stochham", *argv]
    a = subprocess.run(cmd, capture_output=True)
    b = subprocess.run(cmd, capture_output=True)
    assert a.stdout == b.stdout and a.stderr == b.stderr and a.returncode == b.returncode


def test_simulate_files_identical(tmp_path):
    outs = []
    for k in range(2):
        target = tmp_path / f"run{k}.csv"
        subprocess.run([sys.executable, "-m", "stochham", "simulate", KUBO, "--paths", "2",
                        "--h", "0.01", "--seed", "5", "--out", str(target)], check=True,
                       capture_output=True)
        outs.append([(tmp_path / f"run{k}_path{i}.csv").read_bytes() for i in range(2)])
    first = [b.replace(b"run0", b"runX") for b in outs[0]]
    second = [b.replace(b"run1", b"runX") for b in outs[1]]
    assert first == second
