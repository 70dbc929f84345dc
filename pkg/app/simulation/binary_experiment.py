"""
Synthetic binary agents with known loss ratios.

Every agent thresholds the same binormal scores at the Bayes-optimal
threshold for its own L_FP/L_FN, and is then audited blind. Comparing the
recovered ratios with the true ones measures how well the audit works.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from app.config import DEFAULT_RATIOS, BinaryAuditConfig, BinaryExperimentConfig
from app.ethics.binary_ethics import audit_binary_agent, expected_loss, optimal_threshold
from app.models import (AuditMethod, BinaryAuditResult, BinormalFit, ClassPriors, DecisionLog,
                        LossMatrix)

logger = logging.getLogger(__name__)

EXPERIMENT_COLUMNS = [
    "agent", "true_ratio", "true_tau_star", "tau_hat", "recovered_ratio", "relative_error",
    "d_tpr_d_tau", "d_fpr_d_tau", "nonparametric_ratio",
]


@dataclass(frozen=True)
class AuditSample:
    """Scores and true states shared by every agent of one experiment."""

    scores: np.ndarray
    truths: np.ndarray


@dataclass(frozen=True)
class BinaryExperimentResult:
    table: pd.DataFrame
    correlation: Optional[float]
    audits: List[BinaryAuditResult]


def default_ratios() -> List[float]:
    """The 20 L_FP/L_FN ratios of the reference experiment."""
    return list(DEFAULT_RATIOS)


def generator_fit(config: BinaryExperimentConfig) -> BinormalFit:
    return BinormalFit(mu0=config.fit.mu0, sigma0=config.fit.sigma0,
                       mu1=config.fit.mu1, sigma1=config.fit.sigma1)


def generator_priors(config: BinaryExperimentConfig) -> ClassPriors:
    return ClassPriors(p_n=config.priors.p_n, p_p=config.priors.p_p)


def draw_audit_sample(config: BinaryExperimentConfig) -> AuditSample:
    """
    Draw n_per_agent (score, truth) pairs from the generator.

    Truths are Bernoulli(p_p); scores are N(mu_y, sigma_y) given truth y.
    The draw depends only on config, so the same seed gives the same sample.
    """
    rng = np.random.Generator(np.random.PCG64(config.seed))
    truths = (rng.random(config.n_per_agent) < config.priors.p_p).astype(np.int8)
    noise = rng.standard_normal(config.n_per_agent)
    fit = config.fit
    scores = np.where(truths == 1, fit.mu1 + fit.sigma1 * noise, fit.mu0 + fit.sigma0 * noise)
    logger.info(f"Drew audit sample: n={config.n_per_agent}, positives={int(truths.sum())}, "
                f"seed={config.seed}")
    return AuditSample(scores=scores, truths=truths)


def generate_binary_agent_log(ratio: float, config: BinaryExperimentConfig,
                              sample: Optional[AuditSample] = None) -> Tuple[DecisionLog, float]:
    """
    Decision log of an agent that acts optimally for L_FP/L_FN = ratio.

    Args:
        ratio: True loss ratio of the agent
        config: Generator parameters and seed
        sample: Pre-drawn audit sample; drawn from config when omitted

    Returns:
        (log, true_tau_star) where actions are exactly 1{score >= true_tau_star}
    """
    if not ratio > 0:
        raise ValueError(f"loss ratio must be positive, got {ratio}")
    tau_star = optimal_threshold(generator_fit(config), generator_priors(config),
                                 LossMatrix.from_ratio(ratio))
    sample = sample or draw_audit_sample(config)
    actions = (sample.scores >= tau_star).astype(np.int8)
    return DecisionLog(sample.scores, actions, sample.truths), tau_star


def grid_search_threshold_oracle(fit: BinormalFit, priors: ClassPriors, losses: LossMatrix,
                                 lo: float, hi: float, step: float) -> float:
    """Brute-force minimiser of the expected loss over lo, lo+step, ..., hi."""
    if not step > 0 or not hi > lo:
        raise ValueError(f"need step > 0 and hi > lo, got step={step}, range=({lo}, {hi})")
    grid = lo + step * np.arange(int(np.floor((hi - lo) / step)) + 1)
    return float(grid[np.argmin(expected_loss(grid, fit, priors, losses))])


def _audit_agent(index: int, ratio: float, config: BinaryExperimentConfig, sample: AuditSample,
                 audit_config: BinaryAuditConfig) -> Tuple[dict, BinaryAuditResult]:
    log, tau_star = generate_binary_agent_log(ratio, config, sample)
    result = audit_binary_agent(log, AuditMethod.PARAMETRIC, audit_config)

    nonparametric_slope = result.diagnostics.get("nonparametric_slope")
    nonparametric_ratio = None
    if isinstance(nonparametric_slope, float) and nonparametric_slope > 0:
        nonparametric_ratio = nonparametric_slope * result.diagnostics["p_p"] / result.diagnostics["p_n"]

    row = {
        "agent": index,
        "true_ratio": ratio,
        "true_tau_star": tau_star,
        "tau_hat": result.tau_star_estimate,
        "recovered_ratio": result.ratio,
        "relative_error": (result.ratio - ratio) / ratio,
        "d_tpr_d_tau": result.ethics.d_tpr_d_tau,
        "d_fpr_d_tau": result.ethics.d_fpr_d_tau,
        "nonparametric_ratio": nonparametric_ratio,
    }
    logger.debug(f"Agent {index}: true ratio {ratio:.2f}, recovered {result.ratio:.4f}")
    return row, result


def run_binary_experiment(config: Optional[BinaryExperimentConfig] = None,
                          audit_config: Optional[BinaryAuditConfig] = None,
                          threads: int = 1) -> BinaryExperimentResult:
    """
    Generate and audit one agent per configured ratio.

    Args:
        config: Experiment settings (ratios, n, generator, seed)
        audit_config: Audit settings; the parametric method is always used
        threads: Worker threads for the per-agent audits

    Returns:
        BinaryExperimentResult with one table row per agent and the Pearson
        correlation between true and recovered ratios
    """
    config = config or BinaryExperimentConfig()
    audit_config = audit_config or BinaryAuditConfig()
    sample = draw_audit_sample(config)

    logger.info(f"Auditing {len(config.ratios)} agents on {threads} thread(s)")
    outcomes = Parallel(n_jobs=threads, prefer="threads")(
        delayed(_audit_agent)(i, ratio, config, sample, audit_config)
        for i, ratio in enumerate(config.ratios, start=1)
    )

    table = pd.DataFrame([row for row, _ in outcomes], columns=EXPERIMENT_COLUMNS)
    if len(table) > 1:
        correlation = float(np.corrcoef(table["true_ratio"], table["recovered_ratio"])[0, 1])
    else:
        correlation = None
        logger.warning("Correlation needs at least two agents")

    logger.info(f"Binary experiment: correlation(true, recovered) = {correlation}, "
                f"max relative error = {table['relative_error'].abs().max():.4f}")
    return BinaryExperimentResult(table=table, correlation=correlation,
                                  audits=[result for _, result in outcomes])
