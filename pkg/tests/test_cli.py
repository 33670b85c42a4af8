import csv
import json

import numpy as np
import pytest

from olsbpi.cli import main
from olsbpi.config import config_from_dict
from olsbpi.errors import EmptyReport
from olsbpi.experiment import REPORT_COLUMNS, ConvergenceReport, emit_plot_data, run_experiment

from test_config import inline


def write_config(tmp_path, **extra):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(inline(**extra)))
    return str(path)


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_solve(tmp_path, capsys):
    cfg = write_config(tmp_path)
    out = tmp_path / "out"
    assert main(["solve", "--config", cfg, "--out", str(out), "--quiet"]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["converged"] and summary["final_residual"] < 1e-10
    assert summary["oracle_agreement"] < 1e-8
    rows = read_rows(out / "report.csv")
    assert list(rows[0]) == list(REPORT_COLUMNS)
    assert float(rows[-1]["ref_p_err"]) < 1e-10


def test_learn_writes_report_and_figures(tmp_path):
    cfg = write_config(tmp_path, sim={"t_f": 200, "sigma_u": 1.0}, svg=True)
    out = tmp_path / "out"
    assert main(["learn", "--config", cfg, "--out", str(out), "--quiet"]) == 0
    rows = read_rows(out / "report.csv")
    assert len(rows) == 2 * 3
    assert {r["seed"] for r in rows} == {"0", "1"}
    for name in ("fig1a", "fig1b", "fig1c", "fig1d"):
        fig = read_rows(out / f"{name}.csv")
        assert [int(r["iteration"]) for r in fig] == [1, 2, 3]
        assert (out / f"{name}.svg").read_text().startswith("<svg")
    # the last iteration has no G estimate
    assert read_rows(out / "fig1d.csv")[-1]["olsbpi_median"] == "nan"
    summary = json.loads((out / "summary.json").read_text())
    assert len(summary["runs"]) == 2 and summary["failures"] == []
    assert summary["runs"][0]["cond_psi"] > 1


def test_seed_flag_overrides_config(tmp_path):
    cfg = write_config(tmp_path, sim={"t_f": 20, "sigma_u": 1.0})
    out = tmp_path / "out"
    assert main(["learn", "--config", cfg, "--out", str(out), "--seed", "99", "--quiet"]) == 0
    assert {r["seed"] for r in read_rows(out / "report.csv")} == {"99"}


def test_simulate_writes_trajectories(tmp_path):
    cfg = write_config(tmp_path, sim={"t_f": 0.5, "sigma_u": 1.0})
    out = tmp_path / "out"
    assert main(["simulate", "--config", cfg, "--out", str(out), "--quiet"]) == 0
    for seed in (0, 1):
        lines = (out / f"trajectory_{seed}.csv").read_text().splitlines()
        assert lines[0] == "t,x1,x2,u1,y1"
        assert len(lines) == 502
    assert not (out / "report.csv").exists()


def test_robust_writes_one_report_per_magnitude(tmp_path):
    cfg = write_config(tmp_path, disturbance={"mode": "constant",
                                              "magnitudes": [1e-4, 1e-2], "max_iter": 5})
    out = tmp_path / "out"
    assert main(["robust", "--config", cfg, "--out", str(out), "--quiet"]) == 0
    rows = read_rows(out / "report.csv")
    assert {r["magnitude"] for r in rows} == {"0.0001", "0.01"}
    assert len(read_rows(out / "report_magnitude_0.csv")) == 2 * 5
    summary = json.loads((out / "summary.json").read_text())
    assert set(summary["median_terminal_p_err"]) == {"0.0001", "0.01"}


def test_config_errors_exit_2(tmp_path, capsys):
    assert main(["solve", "--quiet"]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("[1, 2")
    assert main(["learn", "--config", str(bad), "--quiet"]) == 2
    assert main(["learn", "--config", write_config(tmp_path, seeds="x"), "--quiet"]) == 2
    assert "seeds" in capsys.readouterr().err


def test_numerical_failure_exits_3_with_summary(tmp_path):
    cfg = write_config(tmp_path, initial_gain=[[-10, -10]])
    out = tmp_path / "out"
    assert main(["learn", "--config", cfg, "--out", str(out), "--quiet"]) == 3
    summary = json.loads((out / "summary.json").read_text())
    assert summary["failures"][0]["error"] == "NotAdmissible"


def test_bad_seed_is_rejected(tmp_path):
    with pytest.raises(SystemExit) as info:
        main(["learn", "--config", write_config(tmp_path), "--seed", "-4"])
    assert info.value.code == 2


def test_report_floats_roundtrip(tmp_path):
    cfg = config_from_dict(inline(sim={"t_f": 20, "sigma_u": 1.0}, seeds=[3]))
    result = run_experiment(cfg, str(tmp_path))
    rows = read_rows(tmp_path / "report.csv")
    for rec, row in zip(result.report.rows, rows):
        assert float(row["k_err"]) == rec.k_err


def test_emit_plot_data_needs_rows(tmp_path):
    with pytest.raises(EmptyReport):
        emit_plot_data(ConvergenceReport(), str(tmp_path))
