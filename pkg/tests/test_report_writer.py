"""Tests for report assembly and the CSV/YAML writers."""

import numpy as np
import pandas as pd
import pytest

from app.config import APP_VERSION, AppConfig
from app.ethics.binary_ethics import audit_binary_agent
from app.ethics.continuous_ethics import ethics_trace, simulate_trajectory
from app.models import ControlLaw, WeightMethod, WeightRatio
from app.reports.report_writer import (build_binary_report, build_continuous_report,
                                       build_experiment_report, load_report, report_to_dict,
                                       run_metadata, table_records, write_frame, write_report,
                                       write_roc_curve, write_trace)
from app.roc import build_empirical_roc
from app.simulation.car_experiment import accident_risk_model, lateness_risk_model


@pytest.fixture
def binary_report(small_log):
    return build_binary_report("agent-7", audit_binary_agent(small_log), AppConfig())


class TestReports:
    """Tests for AuditReport builders and YAML output."""

    def test_binary_report_fields(self, binary_report):
        data = report_to_dict(binary_report)
        assert data["agent_id"] == "agent-7"
        assert data["method"] == "parametric"
        assert data["recovered_ratio"] > 0
        assert len(data["ethics_vector"]) == 2
        assert data["weight_ratio"] is None
        assert list(data["diagnostics"])[0] == "tau_star_estimate"
        assert data["diagnostics"]["tau_star_estimate"] == 0.5
        assert data["config_echo"]["binary"]["method"] == "parametric"
        assert data["metadata"] == run_metadata("audit-binary")
        assert data["metadata"]["app_version"] == APP_VERSION

    def test_write_and_load(self, tmp_path, binary_report):
        path = write_report(binary_report, tmp_path / "reports", "audit_binary")
        assert path.endswith("audit_binary_report.yaml")
        assert load_report(path) == report_to_dict(binary_report)

    def test_byte_identical_rewrites(self, tmp_path, small_log):
        config = AppConfig()
        first = write_report(build_binary_report("a", audit_binary_agent(small_log), config), tmp_path, "x")
        with open(first, "rb") as f:
            before = f.read()
        second = write_report(build_binary_report("a", audit_binary_agent(small_log), config), tmp_path, "x")
        with open(second, "rb") as f:
            assert f.read() == before
        assert b"\r\n" not in before

    def test_continuous_report(self):
        ratios = [WeightRatio(0.8, WeightMethod.RATIO_OF_SUMS),
                  WeightRatio(120.0, WeightMethod.PAPER_LITERAL_SUM_OF_RATIOS)]
        report = build_continuous_report("car", [0.01, -0.008], ratios, {"E1": 0.01},
                                         AppConfig(), "audit-continuous")
        data = report_to_dict(report)
        assert data["weight_ratio"] == {"ratio_of_sums": 0.8, "paper_literal_sum_of_ratios": 120.0,
                                        "selected": "ratio_of_sums"}
        assert data["recovered_ratio"] is None
        assert data["metadata"]["command"] == "audit-continuous"

    def test_experiment_report_rows(self):
        table = pd.DataFrame({"law": [1, 2], "arrival_time": [2.5, np.nan]})
        report = build_experiment_report("experiment-car", table, {"n_laws": 2}, AppConfig(),
                                         "ratio_of_sums", 3)
        data = report_to_dict(report)
        assert data["results"] == [{"law": 1, "arrival_time": 2.5}, {"law": 2, "arrival_time": None}]
        assert data["seed"] == 3
        assert data["diagnostics"] == {"n_laws": 2}

    def test_table_records_are_plain(self):
        records = table_records(pd.DataFrame({"a": np.array([1], dtype=np.int64), "b": [np.float32(0.5)]}))
        assert records == [{"a": 1, "b": 0.5}]
        assert type(records[0]["a"]) is int


class TestCsvWriters:
    """Tests for the CSV data files."""

    def test_roc_header(self, tmp_path, small_log):
        path = write_roc_curve(build_empirical_roc(small_log), tmp_path / "roc.csv")
        frame = pd.read_csv(path)
        assert list(frame.columns) == ["tau", "fpr", "tpr"]
        assert frame["fpr"].is_monotonic_decreasing

    def test_trace_file(self, tmp_path):
        trajectory = simulate_trajectory(ControlLaw(id=1, law=lambda x: 100.0), 4.0, 0.01, 250.0)
        trace = ethics_trace(trajectory, [accident_risk_model(), lateness_risk_model()])
        frame = pd.read_csv(write_trace(trajectory, trace, tmp_path / "trace.csv"))
        assert list(frame.columns) == ["t", "x", "u", "E1", "E2"]
        assert len(frame) == len(trajectory)
        np.testing.assert_allclose(frame["E1"].to_numpy(), trace.vectors[:, 0], rtol=1e-14)

    def test_trace_length_mismatch(self, tmp_path):
        trajectory = simulate_trajectory(ControlLaw(id=1, law=lambda x: 100.0), 1.0, 0.1, 250.0)
        other = simulate_trajectory(ControlLaw(id=1, law=lambda x: 100.0), 2.0, 0.1, 250.0)
        trace = ethics_trace(other, [accident_risk_model()])
        with pytest.raises(ValueError, match="steps"):
            write_trace(trajectory, trace, tmp_path / "trace.csv")

    def test_frame_creates_directories(self, tmp_path):
        path = write_frame(pd.DataFrame({"a": [1]}), tmp_path / "x" / "y" / "a.csv")
        with open(path, encoding="utf-8") as f:
            assert f.read() == "a\n1\n"
