"""Tests for the self-driving car experiment."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from app.config import CarExperimentConfig, LawParams
from app.errors import RangeViolation
from app.simulation import default_control_laws, run_car_experiment
from app.simulation.car_experiment import CAR_COLUMNS, analyse_trajectory, car_risk_models
from app.ethics.continuous_ethics import simulate_trajectory


@pytest.fixture(scope="module")
def reference_run():
    return run_car_experiment(CarExperimentConfig())


class TestDefaultControlLaws:
    """Tests for the control law family."""

    def test_speeds(self):
        laws = default_control_laws()
        assert [law.id for law in laws] == list(range(1, 11))
        assert laws[0](0.0) == 130.0
        assert laws[-1](0.0) == 76.0
        assert all(law(250.0) == 40.0 for law in laws)

    def test_monotone_family(self):
        laws = default_control_laws()
        grid = np.linspace(0.0, 250.0, 51)
        speeds = np.array([[law(x) for x in grid] for law in laws])
        assert np.all(np.diff(speeds, axis=0) <= 0)

    def test_explicit_speeds(self):
        laws = default_control_laws(LawParams(speeds_at_origin=[150.0, 60.0]), n_laws=2)
        assert [law(0.0) for law in laws] == [150.0, 60.0]

    def test_speed_out_of_range(self):
        with pytest.raises(RangeViolation, match="law 1"):
            default_control_laws(LawParams(speeds_at_origin=[250.0]), n_laws=1)


class TestAnalyseTrajectory:
    """Tests for the per-trajectory summary."""

    def test_summary(self):
        config = CarExperimentConfig()
        law = default_control_laws()[0]
        trajectory = simulate_trajectory(law, config.horizon_T, config.dt, config.destination)
        trace, coarse, summary = analyse_trajectory(trajectory, car_risk_models(config), config)
        assert len(trace) == len(trajectory)
        assert len(coarse) == 4
        assert summary["E1"] > 0 and summary["E2"] < 0
        assert_allclose(summary["ratio_of_sums"], -summary["E2"] / summary["E1"])
        assert summary["stationarity_residual"] <= 1e-9 * summary["derivative_mass"]
        assert summary["max_per_step_residual"] > summary["stationarity_residual"]


class TestRunCarExperiment:
    """Tests for the sweep over the ten control laws."""

    def test_table_layout(self, reference_run):
        table = reference_run.table
        assert list(table.columns) == CAR_COLUMNS
        assert list(table["law"]) == list(range(1, 11))
        assert len(reference_run.runs) == 10

    def test_aggressive_laws_arrive_first(self, reference_run):
        table = reference_run.table
        arrived = table["arrival_time"].dropna()
        assert len(arrived) >= 1
        assert arrived.is_monotonic_increasing
        assert (table.loc[arrived.index, "final_position"] == 250.0).all()
        assert (table["final_position"] <= 250.0).all()

    def test_signs_and_ordering(self, reference_run):
        table = reference_run.table
        assert (table["E1"] >= 0).all()
        assert (table["E2"] <= 0).all()
        assert table["E1"].is_monotonic_decreasing
        assert table["E2"].is_monotonic_decreasing
        assert (np.diff(table["ratio_of_sums"]) > 0).all()

    def test_residuals(self, reference_run):
        table = reference_run.table
        assert (table["stationarity_residual"] <= 1e-9 * table["derivative_mass"]).all()

    def test_deterministic_across_threads(self, reference_run):
        pooled = run_car_experiment(CarExperimentConfig(), threads=4)
        assert reference_run.table.equals(pooled.table)

    @pytest.mark.slow
    def test_stable_under_finer_step(self, reference_run):
        fine = run_car_experiment(CarExperimentConfig(dt=0.005))
        for column in ("E1", "E2"):
            assert_allclose(fine.table[column], reference_run.table[column], rtol=0.01)
