"""Tests for the synthetic binary-agent experiment."""

import math

import numpy as np
import pandas as pd
import pytest
from numpy.testing import assert_allclose

from app.config import BinaryExperimentConfig
from app.simulation import default_ratios, generate_binary_agent_log, run_binary_experiment
from app.simulation.binary_experiment import EXPERIMENT_COLUMNS, draw_audit_sample


@pytest.fixture
def small_config():
    return BinaryExperimentConfig(ratios=[0.5, 1.0, 2.0], n_per_agent=2000, seed=7)


def test_default_ratios():
    ratios = default_ratios()
    assert len(ratios) == 20
    assert ratios[0] == 0.10 and ratios[-1] == 5.00
    assert all(r < 1 for r in ratios[:10]) and all(r > 1 for r in ratios[10:])
    ratios.append(99.0)
    assert len(default_ratios()) == 20


class TestDrawAuditSample:
    """Tests for the shared (score, truth) sample."""

    def test_same_seed_same_sample(self, small_config):
        first, second = draw_audit_sample(small_config), draw_audit_sample(small_config)
        assert np.array_equal(first.scores, second.scores)
        assert np.array_equal(first.truths, second.truths)

    def test_different_seed(self, small_config):
        other = BinaryExperimentConfig(ratios=[1.0], n_per_agent=2000, seed=8)
        assert not np.array_equal(draw_audit_sample(small_config).scores,
                                  draw_audit_sample(other).scores)

    def test_shape_and_balance(self, small_config):
        sample = draw_audit_sample(small_config)
        assert sample.scores.shape == sample.truths.shape == (2000,)
        assert set(np.unique(sample.truths)) <= {0, 1}
        assert 0.4 < sample.truths.mean() < 0.6


class TestGenerateBinaryAgentLog:
    """Tests for logs of optimally acting agents."""

    def test_actions_follow_threshold(self, small_config):
        log, tau_star = generate_binary_agent_log(2.0, small_config)
        assert_allclose(tau_star, 0.5 + math.log(2.0), atol=1e-9)
        assert np.array_equal(log.actions, (log.scores >= tau_star).astype(int))

    def test_reuses_sample(self, small_config):
        sample = draw_audit_sample(small_config)
        low, _ = generate_binary_agent_log(0.5, small_config, sample)
        high, _ = generate_binary_agent_log(2.0, small_config, sample)
        assert np.array_equal(low.scores, high.scores)
        assert low.actions.sum() > high.actions.sum()

    def test_non_positive_ratio(self, small_config):
        with pytest.raises(ValueError, match="positive"):
            generate_binary_agent_log(0.0, small_config)


class TestRunBinaryExperiment:
    """Tests for the full experiment."""

    def test_table_layout(self, small_config):
        result = run_binary_experiment(small_config)
        assert list(result.table.columns) == EXPERIMENT_COLUMNS
        assert list(result.table["agent"]) == [1, 2, 3]
        assert list(result.table["true_ratio"]) == [0.5, 1.0, 2.0]
        assert result.table["true_tau_star"].is_monotonic_increasing
        assert (result.table["recovered_ratio"] > 0).all()
        assert len(result.audits) == 3
        assert isinstance(result.correlation, float)

    def test_deterministic_across_threads(self, small_config):
        single = run_binary_experiment(small_config, threads=1)
        pooled = run_binary_experiment(small_config, threads=3)
        pd.testing.assert_frame_equal(single.table, pooled.table)
        assert single.correlation == pooled.correlation

    def test_single_agent_has_no_correlation(self):
        config = BinaryExperimentConfig(ratios=[2.0], n_per_agent=2000)
        assert run_binary_experiment(config).correlation is None

    @pytest.mark.slow
    def test_reference_experiment(self):
        result = run_binary_experiment(BinaryExperimentConfig(), threads=2)
        table = result.table
        assert len(table) == 20
        assert (table["relative_error"].abs() <= 0.15).all()
        assert result.correlation > 0.99

        # agents weighting false positives less than false negatives sit where
        # the FPR falls faster than the TPR, and vice versa
        low, high = table[table["true_ratio"] < 1], table[table["true_ratio"] > 1]
        assert (low["d_fpr_d_tau"] < low["d_tpr_d_tau"]).all()
        assert (high["d_fpr_d_tau"] > high["d_tpr_d_tau"]).all()
        ordered = table.sort_values("true_ratio")
        assert ordered["tau_hat"].is_monotonic_increasing
        # the ROC slope grows with the true ratio
        assert (np.diff(ordered["d_tpr_d_tau"] / ordered["d_fpr_d_tau"]) > 0).all()
