"""End-to-end tests of the ethics-audit command line."""

import numpy as np
import pandas as pd
import pytest
import yaml

from app.cli import main
from app.db import db_manager as db_module
from app.db.db_manager import AuditDBManager
from app.models import DecisionLog
from app.reports.report_writer import load_report, write_decision_log


@pytest.fixture(autouse=True)
def fresh_singleton(monkeypatch):
    monkeypatch.setattr(db_module, "db_manager", None)


@pytest.fixture
def log_file(tmp_path, small_log):
    return str(write_decision_log(small_log, tmp_path / "agent.csv"))


@pytest.fixture
def small_experiment(tmp_path):
    path = tmp_path / "small.yaml"
    path.write_text(yaml.safe_dump({"experiment_binary": {"ratios": [0.5, 2.0], "n_per_agent": 2000}}),
                    encoding="utf-8")
    return str(path)


def test_no_verb_prints_help(capsys):
    assert main([]) == 2
    assert "usage" in capsys.readouterr().err


def test_unknown_verb():
    with pytest.raises(SystemExit) as info:
        main(["audit-everything"])
    assert info.value.code == 2


@pytest.mark.parametrize("argv", [["print-config"], ["--print-config"], ["audit-binary", "x.csv", "--print-config"]])
def test_print_config(capsys, argv):
    assert main(argv + ["--seed", "4"]) == 0
    printed = yaml.safe_load(capsys.readouterr().out)
    assert printed["seed"] == 4
    assert printed["car"]["seed"] == 4


def test_bad_config_is_usage_error(tmp_path, capsys):
    path = tmp_path / "bad.yaml"
    path.write_text("car:\n  wheels: 4\n", encoding="utf-8")
    assert main(["print-config", "--config", str(path)]) == 2
    assert "car.wheels" in capsys.readouterr().err


def test_non_numeric_list_is_usage_error(tmp_path, capsys):
    path = tmp_path / "bad.yaml"
    path.write_text("experiment_binary:\n  ratios: [a, 2.0]\n", encoding="utf-8")
    assert main(["experiment-binary", "--config", str(path), "--out-dir", str(tmp_path)]) == 2
    assert "experiment_binary.ratios" in capsys.readouterr().err


class TestAuditBinary:
    """Tests for the audit-binary verb."""

    def test_report(self, tmp_path, log_file):
        out_dir = tmp_path / "out"
        roc_path = tmp_path / "roc.csv"
        argv = ["audit-binary", log_file, "--out-dir", str(out_dir), "--emit-roc", str(roc_path)]
        assert main(argv) == 0
        report = load_report(out_dir / "audit_binary_report.yaml")
        assert report["agent_id"] == "agent"
        assert report["diagnostics"]["tau_star_estimate"] == 0.5
        assert report["config_echo"]["out_dir"] == str(out_dir)
        assert list(pd.read_csv(roc_path).columns) == ["tau", "fpr", "tpr"]

    def test_rerun_is_byte_identical(self, tmp_path, log_file):
        argv = ["audit-binary", log_file, "--out-dir", str(tmp_path / "out"), "--agent-id", "a"]
        assert main(argv) == 0
        first = (tmp_path / "out" / "audit_binary_report.yaml").read_bytes()
        assert main(argv) == 0
        assert (tmp_path / "out" / "audit_binary_report.yaml").read_bytes() == first

    def test_missing_column(self, tmp_path, capsys):
        path = tmp_path / "broken.csv"
        path.write_text("score,action\n0.1,0\n", encoding="utf-8")
        assert main(["audit-binary", str(path), "--out-dir", str(tmp_path)]) == 2
        err = " ".join(capsys.readouterr().err.split())
        assert "missing column 'truth'" in err
        assert "hint" in err

    def test_inconsistent_actions(self, tmp_path, rng, capsys):
        scores = rng.normal(size=500)
        log = DecisionLog(scores, rng.integers(0, 2, size=500), rng.integers(0, 2, size=500))
        path = write_decision_log(log, tmp_path / "noisy.csv")
        assert main(["audit-binary", path, "--out-dir", str(tmp_path)]) == 1
        assert "InconsistentActions" in capsys.readouterr().err
        assert not (tmp_path / "audit_binary_report.yaml").exists()

    def test_history(self, tmp_path, log_file, capsys):
        db_path = str(tmp_path / "history.duckdb")
        assert main(["audit-binary", log_file, "--out-dir", str(tmp_path), "--db", db_path]) == 0
        assert main(["history", "--db", db_path]) == 0
        assert "Stored runs" in " ".join(capsys.readouterr().out.split())
        manager = AuditDBManager(db_path)
        assert [run["command"] for run in manager.get_all_runs()] == ["audit-binary"]
        manager.close()
        assert main(["history", "--db", db_path, "--run-id", "run_missing"]) == 1


class TestExperimentBinary:
    """Tests for the experiment-binary verb."""

    def test_files(self, tmp_path, small_experiment):
        out_dir = tmp_path / "out"
        argv = ["experiment-binary", "--config", small_experiment, "--out-dir", str(out_dir),
                "--threads", "2", "--emit-log", "2"]
        assert main(argv) == 0
        ratios = pd.read_csv(out_dir / "experiment_binary_ratios.csv")
        assert list(ratios.columns) == ["true_ratio", "recovered_ratio"]
        assert list(ratios["true_ratio"]) == [0.5, 2.0]
        ethics = pd.read_csv(out_dir / "experiment_binary_ethics2vec.csv")
        assert list(ethics.columns) == ["agent", "true_ratio", "d_tpr_d_tau", "d_fpr_d_tau"]
        log = pd.read_csv(out_dir / "agent_2_log.csv")
        assert len(log) == 2000
        assert np.array_equal(log["action"], (log["score"] >= 0.5 + np.log(2.0)).astype(int))
        report = load_report(out_dir / "experiment_binary_report.yaml")
        assert len(report["results"]) == 2

    def test_unknown_agent(self, tmp_path, small_experiment):
        argv = ["experiment-binary", "--config", small_experiment, "--out-dir", str(tmp_path),
                "--emit-log", "5"]
        assert main(argv) == 2

    def test_seed_changes_sample(self, tmp_path, small_experiment):
        for seed in ("1", "2"):
            argv = ["experiment-binary", "--config", small_experiment, "--seed", seed,
                    "--out-dir", str(tmp_path / seed), "--emit-log", "1"]
            assert main(argv) == 0
        first = pd.read_csv(tmp_path / "1" / "agent_1_log.csv")
        second = pd.read_csv(tmp_path / "2" / "agent_1_log.csv")
        assert not first["score"].equals(second["score"])


class TestCar:
    """Tests for experiment-car, simulate-car and audit-continuous."""

    def test_experiment_car(self, tmp_path):
        out_dir = tmp_path / "out"
        assert main(["experiment-car", "--out-dir", str(out_dir), "--emit-trace", "law=2",
                     "--emit-trace", "3"]) == 0
        laws = pd.read_csv(out_dir / "experiment_car_laws.csv")
        assert list(laws["law"]) == list(range(1, 11))
        trace = pd.read_csv(out_dir / "trace_law_2.csv")
        assert list(trace.columns) == ["t", "x", "u", "E1", "E2"]
        assert (out_dir / "trace_law_3.csv").exists()
        assert (out_dir / "experiment_car_report.yaml").exists()

    @pytest.mark.parametrize("law", ["11", "fast"])
    def test_bad_trace_law(self, tmp_path, law):
        assert main(["experiment-car", "--out-dir", str(tmp_path), "--emit-trace", law]) == 2

    def test_audit_observed_trajectory(self, tmp_path):
        out_dir = tmp_path / "out"
        assert main(["simulate-car", "--law", "1", "--out-dir", str(out_dir)]) == 0
        trajectory_path = out_dir / "trajectory_law_1.csv"
        assert not (out_dir / "trajectory_law_2.csv").exists()

        assert main(["audit-continuous", str(trajectory_path), "--out-dir", str(out_dir)]) == 0
        report = load_report(out_dir / "audit_continuous_report.yaml")
        assert report["agent_id"] == "trajectory_law_1"
        assert report["weight_ratio"]["selected"] == "ratio_of_sums"
        assert (out_dir / "audit_continuous_trace.csv").exists()

        assert main(["experiment-car", "--out-dir", str(tmp_path / "sweep")]) == 0
        laws = pd.read_csv(tmp_path / "sweep" / "experiment_car_laws.csv")
        assert report["weight_ratio"]["ratio_of_sums"] == pytest.approx(laws["ratio_of_sums"][0], rel=1e-12)

    def test_unknown_law(self, tmp_path):
        assert main(["simulate-car", "--law", "12", "--out-dir", str(tmp_path)]) == 2

    def test_broken_trajectory(self, tmp_path):
        path = tmp_path / "trajectory.csv"
        path.write_text("t,x,u\n0,0,10\n1,15,10\n", encoding="utf-8")
        assert main(["audit-continuous", str(path), "--out-dir", str(tmp_path)]) == 2
