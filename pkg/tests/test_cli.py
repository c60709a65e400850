import csv
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from fracreg.cli import main


def test_mlf_eval(capsys):
    assert main(["mlf", "eval", "--theta1", "1", "--theta2", "1", "--z", "-1"]) == 0
    value, err = capsys.readouterr().out.split()
    assert float(value) == pytest.approx(math.exp(-1.0), abs=1e-14)
    assert float(err) <= 1e-12


def test_filters_report(tmp_path):
    out = tmp_path / "report.json"
    assert main(["filters", "report", "--theta", "0.8", "--lambda-max", "0.01", "--out", str(out)]) == 0
    report = json.loads(out.read_text())
    assert report["ok"] and report["regime"] == "sub"


def test_filters_sweep(tmp_path):
    out = tmp_path / "sweep.csv"
    assert main(["filters", "sweep", "--theta-list", "1,1.5", "--points", "4", "--csv", str(out)]) == 0
    rows = list(csv.DictReader(out.open()))
    assert {float(r["theta"]) for r in rows} == {1.0, 1.5}
    for r in rows:
        if float(r["theta"]) == 1.0:
            assert float(r["r"]) == pytest.approx(math.exp(-float(r["lambda"]) / float(r["alpha"])), abs=1e-12)


def test_problem_make(tmp_path):
    out = tmp_path / "problem.json"
    assert main(["problem", "make", "--example", "ex1", "--n", "12", "--noise", "0.001", "--seed", "42",
                 "--out", str(out)]) == 0
    data = json.loads(out.read_text())
    assert data["galerkin_matrix"]["shape"] == [12, 12]
    a = np.array(data["galerkin_matrix"]["data"]).reshape(12, 12)
    np.testing.assert_allclose(a, a.T)
    assert data["delta"] == pytest.approx(np.linalg.norm(np.subtract(data["y_noisy"], data["y_exact"])))
    assert data["seed"] == 42 and len(data["x_dagger_nodal"]) == 12


@pytest.mark.parametrize("method", ["far", "landweber", "nesterov", "chebyshev", "cgne"])
def test_solve(tmp_path, method):
    out, res = tmp_path / "run.json", tmp_path / "res.csv"
    argv = ["solve", "--method", method, "--theta", "1.5", "--example", "ex1", "--noise", "0.01", "--seed", "3",
            "--out", str(out), "--residual-csv", str(res)]
    assert main(argv) == 0
    run = json.loads(out.read_text())
    assert run["stop_reason"] == "discrepancy" and run["seed"] == 3
    history = np.loadtxt(res, delimiter=",", skiprows=1)
    assert history.shape == (run["k_star"] + 1, 2)
    np.testing.assert_allclose(history[:, 1], run["residual_norms"])


def test_bench_run_and_rate(tmp_path):
    cfg = tmp_path / "bench.json"
    cfg.write_text(json.dumps({"examples": ["ex1"], "methods": ["far:1.2", "cgne"], "noise_magnitudes": [0.01],
                               "seeds": [0, 1]}))
    assert main(["bench", "run", "--config", str(cfg), "--out", str(tmp_path / "res")]) == 0
    assert (tmp_path / "res" / "records.csv").exists()
    rate = tmp_path / "rate.json"
    assert main(["bench", "rate", "--deltas", "1e-1,1e-2,1e-3,1e-4", "--seeds", "0", "--out", str(rate),
                 "--plot-dir", str(tmp_path / "plots")]) == 0
    assert json.loads(rate.read_text())["error_slope"] > 0.3
    assert (tmp_path / "plots" / "rate_loglog.gp").exists()


def test_config_errors_exit_nonzero(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"methods": ["far:7"]}))
    assert main(["bench", "run", "--config", str(bad), "--out", str(tmp_path / "x")]) == 2
    assert main(["bench", "run", "--config", str(tmp_path / "missing.json"), "--out", str(tmp_path / "x")]) == 2
    assert main(["mlf", "eval", "--theta1", "-1", "--z", "0"]) == 2
    assert "error:" in capsys.readouterr().err
    with pytest.raises(SystemExit):
        main(["solve", "--method", "gmres"])


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "fracreg", "mlf", "eval", "--theta1", "0.5", "--z", "-2"],
                          capture_output=True, text=True, check=True)
    assert float(proc.stdout.split()[0]) == pytest.approx(0.2553956763105058, rel=1e-14)
