"""Shared fixtures."""

import numpy as np
import pytest

from app.config import BinaryExperimentConfig
from app.models import BinormalFit, ClassPriors, DecisionLog
from app.simulation.binary_experiment import draw_audit_sample


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_log():
    """Eight hand-built records with an obvious threshold between 0.4 and 0.6."""
    return DecisionLog.from_records([
        (-1.0, 0, 0), (-0.5, 0, 0), (0.1, 0, 1), (0.4, 0, 0),
        (0.6, 1, 1), (0.9, 1, 0), (1.3, 1, 1), (2.0, 1, 1),
    ])


@pytest.fixture
def unit_fit():
    return BinormalFit(mu0=0.0, sigma0=1.0, mu1=1.0, sigma1=1.0)


@pytest.fixture
def balanced():
    return ClassPriors(p_n=0.5, p_p=0.5)


@pytest.fixture(scope="session")
def binormal_sample():
    """10^5 balanced binormal (0,1,1,1) scores drawn with the default seed."""
    return draw_audit_sample(BinaryExperimentConfig())


@pytest.fixture(scope="session")
def binormal_log(binormal_sample):
    """The 10^5-record sample acted on at the ratio-2 optimum tau* = 0.5 + ln 2."""
    tau_star = 0.5 + np.log(2.0)
    actions = (binormal_sample.scores >= tau_star).astype(np.int8)
    return DecisionLog(binormal_sample.scores, actions, binormal_sample.truths)
