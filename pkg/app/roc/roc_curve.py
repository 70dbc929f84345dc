"""
Empirical and binormal ROC representations of a thresholding agent, and
the ROC slopes and threshold derivatives used to recover its loss ratio.

The agent predicts 1 iff score >= tau, so ties at tau count as positive
predictions everywhere in this module.
"""

import logging
import math
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.stats import norm

from app.config import BANDWIDTH_FACTOR, MIN_WINDOW_POINTS, ZERO_TOLERANCE
from app.errors import (EmptyLog, FlatFprWindow, InsufficientPoints, NonFiniteThreshold,
                        SingleClassLog, TauOutOfRange, ZeroVariance)
from app.models import BinormalFit, ClassPriors, DecisionLog, RocCurve

logger = logging.getLogger(__name__)


def _require_classes(log: DecisionLog, minimum: int) -> None:
    if len(log) == 0:
        raise EmptyLog("decision log is empty")
    n_neg, n_pos = log.n_negative, log.n_positive
    if n_neg < minimum or n_pos < minimum:
        raise SingleClassLog(
            f"need at least {minimum} record(s) per class, got {n_neg} with truth=0 "
            f"and {n_pos} with truth=1")


def estimate_priors(log: DecisionLog) -> ClassPriors:
    """Frequency estimate of the class priors."""
    _require_classes(log, 1)
    p_p = log.n_positive / len(log)
    return ClassPriors(p_n=1.0 - p_p, p_p=p_p)


def _survival_counts(sorted_scores: np.ndarray, taus: np.ndarray) -> np.ndarray:
    # number of scores >= tau
    return len(sorted_scores) - np.searchsorted(sorted_scores, taus, side="left")


def build_empirical_roc(log: DecisionLog, thresholds: Optional[Sequence[float]] = None) -> RocCurve:
    """
    Trace the empirical ROC curve.

    Args:
        log: Decision log with at least one record per class
        thresholds: Optional thresholds; by default the unique scores plus one
            sentinel below the minimum and one above the maximum

    Returns:
        RocCurve with fpr(tau) = #{y=0, s>=tau}/#{y=0} and
        tpr(tau) = #{y=1, s>=tau}/#{y=1}, ascending in tau
    """
    _require_classes(log, 1)

    if thresholds is None:
        unique = np.unique(log.scores)
        taus = np.concatenate(([unique[0] - 1.0], unique, [unique[-1] + 1.0]))
    else:
        taus = np.asarray(thresholds, dtype=float)
        if taus.ndim != 1 or len(taus) == 0:
            raise NonFiniteThreshold("thresholds must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(taus)):
            raise NonFiniteThreshold("thresholds must be finite")
        taus = np.unique(taus)

    negatives = np.sort(log.class_scores(0))
    positives = np.sort(log.class_scores(1))
    fprs = _survival_counts(negatives, taus) / len(negatives)
    tprs = _survival_counts(positives, taus) / len(positives)

    logger.debug(f"Empirical ROC with {len(taus)} points from {len(log)} records")
    return RocCurve(taus=taus, fprs=fprs, tprs=tprs)


def fit_binormal(log: DecisionLog) -> BinormalFit:
    """
    Fit the binormal model by per-class moments.

    Args:
        log: Decision log with at least two records per class

    Returns:
        BinormalFit with sample means and sample standard deviations (ddof=1)
    """
    _require_classes(log, 2)

    params = {}
    for truth in (0, 1):
        scores = log.class_scores(truth)
        sigma = float(np.std(scores, ddof=1))
        if not sigma > 0:
            raise ZeroVariance(f"all scores with truth={truth} are identical ({scores[0]})")
        params[f"mu{truth}"] = float(np.mean(scores))
        params[f"sigma{truth}"] = sigma

    fit = BinormalFit(**params)
    logger.info(f"Binormal fit: mu0={fit.mu0:.4f}, sigma0={fit.sigma0:.4f}, "
                f"mu1={fit.mu1:.4f}, sigma1={fit.sigma1:.4f}")
    return fit


def parametric_roc(fit: BinormalFit, taus: Sequence[float]) -> RocCurve:
    """Binormal ROC curve sampled at the given thresholds."""
    taus = np.unique(np.asarray(taus, dtype=float))
    fprs = norm.cdf((fit.mu0 - taus) / fit.sigma0)
    tprs = norm.cdf((fit.mu1 - taus) / fit.sigma1)
    return RocCurve(taus=taus, fprs=fprs, tprs=tprs)


def operating_point(fit: BinormalFit, tau: float) -> Tuple[float, float]:
    """(FPR, TPR) of the binormal model at tau."""
    fpr = float(norm.cdf((fit.mu0 - tau) / fit.sigma0))
    tpr = float(norm.cdf((fit.mu1 - tau) / fit.sigma1))
    return fpr, tpr


def empirical_operating_point(roc: RocCurve, tau: float) -> Tuple[float, float]:
    """(FPR, TPR) of an empirical curve at tau, linearly interpolated."""
    return float(np.interp(tau, roc.taus, roc.fprs)), float(np.interp(tau, roc.taus, roc.tprs))


def parametric_derivatives(fit: BinormalFit, tau: float) -> Tuple[float, float]:
    """
    Threshold derivatives of the binormal TPR and FPR.

    Returns:
        (dTPR/dtau, dFPR/dtau) = (-phi(z1)/sigma1, -phi(z0)/sigma0) with
        z_c = (mu_c - tau)/sigma_c
    """
    d_tpr = -norm.pdf((fit.mu1 - tau) / fit.sigma1) / fit.sigma1
    d_fpr = -norm.pdf((fit.mu0 - tau) / fit.sigma0) / fit.sigma0
    return float(d_tpr), float(d_fpr)


def log_roc_slope(fit: BinormalFit, tau: float, paper_literal: bool = False) -> float:
    """Natural log of roc_slope_parametric, finite for any finite tau."""
    log_slope = float(norm.logpdf((fit.mu1 - tau) / fit.sigma1)
                      - norm.logpdf((fit.mu0 - tau) / fit.sigma0))
    if not paper_literal:
        log_slope += math.log(fit.sigma0) - math.log(fit.sigma1)
    return log_slope


def roc_slope_parametric(fit: BinormalFit, tau: float, paper_literal: bool = False) -> float:
    """
    Slope dTPR/dFPR of the binormal ROC curve at threshold tau.

    Args:
        fit: Binormal model
        tau: Threshold
        paper_literal: Drop the 1/sigma factors of the chain rule, giving
            phi(z1)/phi(z0); identical to the default when sigma0 == sigma1

    Returns:
        Strictly positive slope
    """
    # evaluated in log space so the ratio of two tail densities stays finite
    return float(np.exp(log_roc_slope(fit, tau, paper_literal)))


def default_bandwidth(log: DecisionLog, factor: float = BANDWIDTH_FACTOR) -> float:
    """Nonparametric window half-width: factor times the std of all scores."""
    if len(log) < 2:
        raise EmptyLog("need at least two records to size the bandwidth")
    spread = float(np.std(log.scores, ddof=1))
    if not spread > 0:
        raise ZeroVariance("all scores are identical; cannot size the bandwidth")
    return factor * spread


def nonparametric_derivatives(roc: RocCurve, tau: float, bandwidth: float) -> Tuple[float, float]:
    """
    Local linear estimates of dTPR/dtau and dFPR/dtau.

    A straight line is fitted by least squares to the curve points whose
    threshold lies within +-bandwidth of tau.

    Returns:
        (dTPR/dtau, dFPR/dtau)
    """
    if not bandwidth > 0:
        raise ValueError(f"bandwidth must be positive, got {bandwidth}")
    if not math.isfinite(tau):
        raise NonFiniteThreshold(f"tau must be finite, got {tau}")
    if tau < roc.taus[0] or tau > roc.taus[-1]:
        raise TauOutOfRange(
            f"tau={tau} outside the curve's threshold range [{roc.taus[0]}, {roc.taus[-1]}]")

    in_window = np.abs(roc.taus - tau) <= bandwidth * (1 + 1e-9)
    n_points = int(np.count_nonzero(in_window))
    if n_points < MIN_WINDOW_POINTS:
        raise InsufficientPoints(
            f"only {n_points} curve point(s) within +-{bandwidth} of tau={tau}, "
            f"need {MIN_WINDOW_POINTS}")

    centered = roc.taus[in_window] - tau
    d_tpr = np.polyfit(centered, roc.tprs[in_window], 1)[0]
    d_fpr = np.polyfit(centered, roc.fprs[in_window], 1)[0]
    logger.debug(f"Local fit at tau={tau:.4f} over {n_points} points: "
                 f"dTPR={d_tpr:.6g}, dFPR={d_fpr:.6g}")
    return float(d_tpr), float(d_fpr)


def roc_slope_nonparametric(roc: RocCurve, tau: float, bandwidth: float) -> float:
    """
    Slope dTPR/dFPR of an ROC curve at tau from local linear fits.

    Raises:
        TauOutOfRange, InsufficientPoints, FlatFprWindow
    """
    d_tpr, d_fpr = nonparametric_derivatives(roc, tau, bandwidth)
    if abs(d_fpr) < ZERO_TOLERANCE:
        raise FlatFprWindow(f"dFPR/dtau estimate {d_fpr:.3g} is zero around tau={tau}")
    return d_tpr / d_fpr
