import json
import subprocess
import sys

import pytest

from cohtrap.cli import main
from cohtrap.sweeps import read_csv

COMMANDS = ["coefficients", "evolve", "scan-initial", "lambda-curve", "solve"]


@pytest.mark.parametrize("cmd", COMMANDS)
def test_help_every_command(cmd, capsys):
    with pytest.raises(SystemExit) as info:
        main([cmd, "--help"])
    assert info.value.code == 0
    assert "usage" in capsys.readouterr().out


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "cohtrap", "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "scan-initial" in out.stdout


def test_solve_reference(capsys):
    assert main(["solve", "--config", "configs/fig1.conf"]) == 0
    out = capsys.readouterr().out
    assert "feasible: yes" in out
    lam = float(out.split("lambda* = ")[1].split()[0])
    assert lam == pytest.approx(0.09, abs=0.005)
    d = float(out.split("Delta(inf; lambda*) = ")[1].split()[0])
    assert d == pytest.approx(-1.0, rel=1e-6)


def test_solve_drude_high_t(capsys):
    argv = ["solve", "--gamma", "5", "--omega0", "0", "--temperature", "100", "--spectrum", "high_temperature"]
    assert main(argv) == 0
    out = capsys.readouterr().out
    assert "feasible: no" in out
    assert float(out.split("I = ")[1].split()[0]) == pytest.approx(-60.4152433, rel=1e-6)


def test_zero_coupling_coefficients_file(tmp_path, capsys):
    out = tmp_path / "c.csv"
    assert main(["coefficients", "--lambda", "0", "--t-end", "1", "--out", str(out), "--workers", "1"]) == 0
    header, rows = read_csv(out)
    assert header == ["t", "delta", "gamma_rate"]
    assert rows and all(r[1] == "0" and r[2] == "0" for r in rows)


def test_missing_output_dir(tmp_path, capsys):
    target = tmp_path / "missing" / "c.csv"
    code = main(["coefficients", "--lambda", "0", "--t-end", "1", "--out", str(target), "--workers", "1"])
    assert code != 0
    assert str(target.parent) in capsys.readouterr().err


def test_flag_precedence_and_config_echo(tmp_path, capsys):
    conf = tmp_path / "run.conf"
    conf.write_text("bath.gamma = 5\nbath.omega0 = 10\nbath.temperature = 50\nmodel.lambda = 0.05\noutput.format = json\n")
    out = tmp_path / "c.json"
    argv = ["coefficients", "--config", str(conf), "--temperature", "100", "--t-end", "0.5", "--out", str(out)]
    assert main(argv + ["--workers", "1"]) == 0
    meta = json.loads(out.read_text())["metadata"]
    cfg = meta["config"]
    assert float(cfg["bath.temperature"]) == 100.0  # flag beats file
    assert float(cfg["model.lambda"]) == 0.05  # file beats default
    assert cfg["run.grid_n"] == 41  # default
    assert meta["bath"]["temperature"] == 100.0


def test_aggregated_config_errors(tmp_path, capsys):
    conf = tmp_path / "bad.conf"
    conf.write_text("bath.gamma = -1\nbath.colour = red\n")
    assert main(["solve", "--config", str(conf)]) == 2
    conf.write_text("bath.gamma = -1\nrun.grid_n = 4\noutput.format = xml\n")
    assert main(["solve", "--config", str(conf)]) == 2
    err = capsys.readouterr().err
    assert "bath.gamma" in err and "run.grid_n" in err and "output.format" in err


def test_evolve_writes_one_file_per_initial(tmp_path, capsys):
    out = tmp_path / "traj.csv"
    argv = ["evolve", "--config", "configs/fig1.conf", "--t-end", "3", "--out", str(out)]
    argv += ["--initial", "0.8,0.4", "--initial", "0.6,0.4"]
    assert main(argv + ["--workers", "1"]) == 0
    printed = capsys.readouterr().out
    assert "two-stage estimate" in printed
    for k in range(2):
        header, rows = read_csv(tmp_path / f"traj_{k}.csv")
        assert header == ["t", "x", "y", "coherence"]
    meta = json.loads((tmp_path / "traj_0.csv.meta.json").read_text())["metadata"]
    assert meta["initial"] == {"x": 0.8, "y": 0.4}


def test_scan_initial_summary(tmp_path, capsys):
    out = tmp_path / "scan.json"
    argv = ["scan-initial", "--config", "configs/fig1.conf", "--grid-n", "5", "--t-end", "3"]
    assert main(argv + ["--out", str(out), "--format", "json", "--strict", "--workers", "1"]) == 0
    printed = capsys.readouterr().out
    assert "max C(inf)" in printed and "symmetry-axis slope" in printed
    data = json.loads(out.read_text())["data"]
    assert len(data) == 25 and sum(d["c_inf"] is None for d in data) == 12


def test_lambda_curve_infeasible_family(tmp_path, capsys):
    out = tmp_path / "curve.csv"
    argv = ["lambda-curve", "--config", "configs/fig2_infeasible.conf", "--n-temps", "9", "--out", str(out)]
    assert main(argv + ["--workers", "1"]) == 0
    assert "feasibility lost between" in capsys.readouterr().out
    header, rows = read_csv(out)
    assert header == ["T", "lambda", "feasible", "pv_integral", "error"] and len(rows) == 9


def test_lambda_curve_turning_point(tmp_path, capsys):
    out = tmp_path / "curve.csv"
    argv = ["lambda-curve", "--config", "configs/fig2_feasible.conf", "--n-temps", "9", "--out", str(out)]
    assert main(argv + ["--workers", "1"]) == 0
    printed = capsys.readouterr().out
    assert "9/9 temperatures feasible" in printed and "turning point" in printed


def test_auto_lambda_infeasible_is_error(capsys):
    argv = ["coefficients", "--omega0", "0", "--temperature", "100", "--lambda-auto", "--workers", "1"]
    assert main(argv) == 1
    assert "no solution" in capsys.readouterr().err


def test_env_workers_used(monkeypatch, tmp_path, capsys):
    monkeypatch.setenv("COHTRAP_WORKERS", "2")
    out = tmp_path / "c.csv"
    assert main(["coefficients", "--lambda", "0.05", "--t-end", "0.2", "--out", str(out)]) == 0
    monkeypatch.setenv("COHTRAP_WORKERS", "1")
    out1 = tmp_path / "c1.csv"
    assert main(["coefficients", "--lambda", "0.05", "--t-end", "0.2", "--out", str(out1)]) == 0
    assert out.read_bytes() == out1.read_bytes()
