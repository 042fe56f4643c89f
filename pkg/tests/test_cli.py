import json

import numpy as np
import pytest

from gfksd.cli import EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, main
from gfksd.discrepancy import ParticleMeasure


def _write(path, payload):
    path.write_text(json.dumps(payload))
    return str(path)


def test_stein_is_writes_weights_and_summary(tmp_path, capsys):
    p = _write(tmp_path / "p.json", {"kind": "gaussian", "mean": [0, 0], "cov": [[1, 0], [0, 1]]})
    q = _write(tmp_path / "q.json", {"kind": "gaussian", "mean": [0, 0], "std": 1.2})
    out = tmp_path / "w.csv"
    code = main(["stein-is", "--target", p, "--surrogate", q, "--n", "30", "--out", str(out),
                 "--seed", "4"])
    assert code == EXIT_OK
    pm = ParticleMeasure.from_csv(out)
    assert pm.n == 30 and pm.weights.sum() == pytest.approx(1.0)
    summary = json.loads(out.with_suffix(".json").read_text())
    assert summary["converged"] is True
    assert json.loads(capsys.readouterr().out)["gfksd"] == pytest.approx(summary["gfksd"])


def test_stein_is_laplace_surrogate_and_global_flags(tmp_path):
    code = main(["--seed", "2", "--out-dir", str(tmp_path), "stein-is", "--target",
                 "three_component_mixture", "--n", "20", "--standardize"])
    assert code == EXIT_OK
    assert (tmp_path / "weights.csv").exists() and (tmp_path / "weights.json").exists()


def test_configuration_errors_exit_2(tmp_path, capsys):
    bad = _write(tmp_path / "bad.json", {"kind": "gaussian", "mean": [0, 0]})
    assert main(["stein-is", "--target", bad, "--out-dir", str(tmp_path)]) == EXIT_CONFIG
    assert main(["stein-is", "--target", "no_such_target"]) == EXIT_CONFIG
    broken = tmp_path / "broken.json"
    broken.write_text("{not json")
    assert main(["stein-is", "--target", "three_component_mixture", "--config", str(broken)]) == EXIT_CONFIG
    eps = tmp_path / "eps.csv"
    eps.write_text("1.5\n")
    assert main(["stein-vi", "--target", "three_component_mixture", "--schedule", str(eps),
                 "--out-dir", str(tmp_path)]) == EXIT_CONFIG
    assert "configuration error" in capsys.readouterr().err


def test_numerical_failure_exits_3(tmp_path, capsys):
    # Laplace from 0 sits at the density minimum between the two bumps
    code = main(["stein-is", "--target", "separated_mixture", "--n", "10", "--out-dir", str(tmp_path)])
    assert code == EXIT_NUMERICAL
    assert "DefinitenessError" in capsys.readouterr().err


def test_stein_vi_pads_schedule(tmp_path):
    target = _write(tmp_path / "t.json", {"kind": "gaussian", "mean": [1.0], "variance": [[0.8]]})
    eps = tmp_path / "eps.csv"
    eps.write_text("1.0\n0.5\n0.0\n")
    out = tmp_path / "trace.csv"
    code = main(["stein-vi", "--target", target, "--schedule", str(eps), "--iters", "12",
                 "--batch", "16", "--step", "0.01", "--out", str(out)])
    assert code == EXIT_OK
    trace = np.loadtxt(out, delimiter=",", skiprows=1)
    assert trace.shape == (12, 4)
    summary = json.loads(out.with_suffix(".json").read_text())
    assert summary["iterations"] == 12 and len(summary["shift"]) == 1


def test_failure_mode_and_lv_demo(tmp_path):
    assert main(["failure-mode", "--mode", "dirac_escape", "--out-dir", str(tmp_path)]) == EXIT_OK
    lines = (tmp_path / "failure_dirac_escape.csv").read_text().splitlines()
    assert lines[0].startswith("sequence,n,gfksd") and len(lines) == 11
    assert main(["lv-demo", "--n", "5", "--out-dir", str(tmp_path)]) == EXIT_OK
    summary = json.loads((tmp_path / "lv_summary.json").read_text())
    assert summary["laplace"]["n_grad_evals"] > 0
    assert ParticleMeasure.from_csv(tmp_path / "lv_stein_weights.csv").dim == 8


def test_convergence_study_cli(tmp_path):
    code = main(["convergence-study", "--strategy", "laplace", "oracle", "--length", "8",
                 "--m", "40", "--out-dir", str(tmp_path)])
    assert code == EXIT_OK
    for s in ("laplace", "oracle"):
        meta = json.loads((tmp_path / f"convergence_{s}.json").read_text())
        assert meta["q_strategy"] == s and len(meta["summary"]) == 6
