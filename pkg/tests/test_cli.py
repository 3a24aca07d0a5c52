import os
import subprocess
import sys

import numpy as np
import pytest

from tomokin.cli import list_presets, main
from tomokin.fieldfile import FieldFile
from tomokin.runner import parse_report

from scenarios import TINY, TINY_2P, edit


def _write(tmp_path, text, name="s.toml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def _files(d):
    out = {}
    for root, _, names in os.walk(d):
        for n in names:
            p = os.path.join(root, n)
            with open(p, "rb") as fh:
                out[os.path.relpath(p, d)] = fh.read()
    return out


def ff_phase_profile(d):
    ff = FieldFile.read(d / "tomogram_phase_t0.200000.tomk")
    mu = np.linspace(-2.0, 2.0, 33)[:-1]
    return ff.values[:, int(np.argmin(np.abs(mu - 1.0))), int(np.argmin(np.abs(mu)))]


def test_list_presets(capsys):
    assert main(["list-presets"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) >= 5
    names = [n for n, _ in list_presets()]
    assert {"free-1p", "harmonic-1p", "pair-harmonic-2p", "reduction-consistency-2p"} <= set(names)
    assert all(line.split()[0] in names for line in lines)


def test_run_writes_outputs(tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["run", _write(tmp_path, TINY), "--out-dir", str(out)]) == 0
    d = out / "tiny"
    rep = parse_report((d / "report.txt").read_text())
    assert rep["run"]["status"] == "pass"
    assert rep["check.identity"]["status"] == "pass"
    assert float(rep["check.normalization"]["max_deviation"]) < 1e-6
    ff = FieldFile.read(d / "tomogram_tomo_t0.200000.tomk")
    assert ff.axes[0] == (-8.0, 8.0, 32) and ff.axes[1] == (-2.0, 2.0, 32)
    assert ff.values.shape == (32, 32, 32)
    cols = np.loadtxt(d / "tomogram_phase_t0.200000.dat")
    assert cols.shape == (32, 3)
    header = (d / "tomogram_phase_t0.200000.dat").read_text().splitlines()[0]
    assert header == "# X w(mu=1.0,nu=0.0) w(mu=0.0,nu=1.0)"
    assert np.array_equal(cols[:, 1], ff_phase_profile(d))
    dens = np.loadtxt(d / "density_t0.200000.dat")
    assert dens.shape == (64 * 64, 3)
    assert abs(dens[:, 2].sum() * (18 / 64) ** 2 - 1) < 1e-10
    assert (d / "report.dat").exists()
    assert "report:" in capsys.readouterr().out


def test_repeated_runs_are_bit_identical(tmp_path):
    sc = _write(tmp_path, TINY)
    assert main(["run", sc, "--out-dir", str(tmp_path / "a")]) == 0
    assert main(["run", sc, "--out-dir", str(tmp_path / "b")]) == 0
    a, b = _files(tmp_path / "a"), _files(tmp_path / "b")
    assert a.keys() == b.keys() and len(a) >= 8
    assert all(a[k] == b[k] for k in a)


def test_pair_run(tmp_path):
    assert main(["run", _write(tmp_path, TINY_2P), "--out-dir", str(tmp_path)]) == 0
    d = tmp_path / "tiny-pair"
    ff = FieldFile.read(d / "tomogram_reduced_t0.100000.tomk")
    assert ff.values.shape == (64, 2)
    assert np.abs(ff.values.sum(axis=0) * 24 / 64 - 1).max() < 1e-10
    assert FieldFile.read(d / "marginal_t0.100000.tomk").values.shape == (48, 48)
    assert (d / "tomogram_reduced_t0.100000.frames").read_text().count("\n") >= 2


def test_env_var_sets_out_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("TOMOKIN_OUT_DIR", str(tmp_path / "env"))
    assert main(["run", _write(tmp_path, TINY)]) == 0
    assert (tmp_path / "env" / "tiny" / "report.txt").exists()


@pytest.mark.parametrize("argv", [["run"], ["fly"], ["run", "x.toml", "--threads", "0"],
                                  ["run", "x.toml", "--tolerance-scale", "-1"],
                                  ["run", "x.toml", "--threads", "two"]])
def test_bad_arguments_exit_2(argv):
    with pytest.raises(SystemExit) as e:
        main(argv)
    assert e.value.code == 2


def test_parse_errors_exit_2(tmp_path, capsys):
    assert main(["run", _write(tmp_path, "name = [", "bad.toml")]) == 2
    assert main(["run", str(tmp_path / "missing.toml")]) == 2
    assert main(["run", "no-such-preset"]) == 2
    assert main(["verify", "no-such-preset"]) == 2
    assert "parse error" in capsys.readouterr().err


def test_validation_errors_exit_3(tmp_path, capsys):
    text = edit(TINY_2P, "values = [[1.0, 0.0], [0.7, 0.7]]", "values = [[1.0, 0.0], [0.0, 0.0]]")
    assert main(["run", _write(tmp_path, text), "--out-dir", str(tmp_path)]) == 3
    err = capsys.readouterr().err
    assert "validation error" in err and "(0.0, 0.0)" in err and "frame 1" in err


def test_failed_check_exit_4_and_scale(tmp_path, capsys):
    text = edit(TINY, "[checks.normalization]", "[checks.normalization]\n[checks.commuting]\nrefine = false")
    sc = _write(tmp_path, text)
    assert main(["run", sc, "--out-dir", str(tmp_path / "a")]) == 4
    err = capsys.readouterr().err
    assert "check commuting failed" in err
    rep = parse_report((tmp_path / "a" / "tiny" / "report.txt").read_text())
    assert rep["run"]["status"] == "fail" and rep["run"]["failed"] == "commuting"
    sup = float(rep["check.commuting"]["sup"])
    assert 1e-3 < sup < 1e-2
    assert main(["run", sc, "--out-dir", str(tmp_path / "b"), "--tolerance-scale", "10"]) == 0
    rep = parse_report((tmp_path / "b" / "tiny" / "report.txt").read_text())
    assert float(rep["check.commuting"]["tolerance"]) == pytest.approx(1e-2)
    assert float(rep["check.commuting"]["sup"]) == sup


def test_numeric_failures_exit_4(tmp_path, capsys):
    edge = edit(TINY, 'kind = "random-gaussian"\nspread = [0.7, 1.0]\nshift = 0.5',
                'kind = "gaussian"\nmean = [8.0, 0.0]\ncovariance = [[1.0, 0.0], [0.0, 1.0]]')
    assert main(["run", _write(tmp_path, edge), "--out-dir", str(tmp_path)]) == 4
    assert "numeric failure in tiny" in capsys.readouterr().err
    coarse = TINY_2P.replace(", 48]", ", 32]")
    assert main(["run", _write(tmp_path, coarse), "--out-dir", str(tmp_path)]) == 4
    assert "AccuracyError" in capsys.readouterr().err


def test_console_script_exit_codes(tmp_path):
    env = dict(os.environ, TOMOKIN_OUT_DIR=str(tmp_path))
    r = subprocess.run([sys.executable, "-m", "tomokin.cli", "run", str(tmp_path / "nope.toml")],
                       capture_output=True, text=True, env=env)
    assert r.returncode == 2
    r = subprocess.run([sys.executable, "-m", "tomokin.cli", "list-presets"],
                       capture_output=True, text=True, env=env)
    assert r.returncode == 0 and "verify-gaussian" in r.stdout
