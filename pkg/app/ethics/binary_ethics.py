"""
Recovery of a binary agent's implicit false-positive / false-negative loss
ratio, and its Ethics2Vec embedding [dTPR/dtau, dFPR/dtau].

An agent that thresholds its score at tau* and minimises
    L(tau) = l_fp * FPR(tau) * p_n + l_fn * (1 - TPR(tau)) * p_p
must operate where the ROC slope equals (l_fp / l_fn) * (p_n / p_p). Reading
the slope off observed behaviour therefore reveals l_fp / l_fn.
"""

import logging
import math
from typing import List, Optional, Tuple, Union

import numpy as np
from scipy.optimize import brentq
from scipy.stats import norm

from app.config import ROOT_BRACKET_LIMIT, BinaryAuditConfig
from app.errors import (EthicsAuditError, FlatFprWindow, InconsistentActions, NoInteriorOptimum,
                        NonPositiveSlope)
from app.models import (AuditMethod, BinaryAuditResult, BinormalFit, ClassPriors, DecisionLog,
                        EthicsVector2D, LossMatrix)
from app.roc.roc_curve import (build_empirical_roc, default_bandwidth, estimate_priors,
                               fit_binormal, log_roc_slope, nonparametric_derivatives,
                               operating_point, parametric_derivatives, roc_slope_parametric)

logger = logging.getLogger(__name__)


def expected_loss(tau: Union[float, np.ndarray], fit: BinormalFit, priors: ClassPriors,
                  losses: LossMatrix) -> Union[float, np.ndarray]:
    """
    Average loss of thresholding at tau under the binormal model.

    Accepts a scalar or an array of thresholds.
    """
    fpr = norm.cdf((fit.mu0 - np.asarray(tau, dtype=float)) / fit.sigma0)
    fnr = norm.cdf((np.asarray(tau, dtype=float) - fit.mu1) / fit.sigma1)  # 1 - TPR
    loss = losses.l_fp * fpr * priors.p_n + losses.l_fn * fnr * priors.p_p
    return float(loss) if np.ndim(loss) == 0 else loss


def _target_log_slope(priors: ClassPriors, losses: LossMatrix) -> float:
    return math.log(losses.ratio) + math.log(priors.p_n) - math.log(priors.p_p)


def _log_slope_gap(fit: BinormalFit, log_target: float):
    def gap(tau: float) -> float:
        return log_roc_slope(fit, tau) - log_target
    return gap


def _log_slope_gradient(fit: BinormalFit, tau: float) -> float:
    # d/dtau log(dTPR/dFPR)
    return (fit.mu1 - tau) / fit.sigma1 ** 2 - (fit.mu0 - tau) / fit.sigma0 ** 2


def _bracketed_root(gap, start: float, direction: float, scale: float) -> Optional[float]:
    """Walk away from start until gap changes sign, then solve with brentq."""
    lo = start
    g_lo = gap(lo)
    if g_lo == 0.0:
        return lo
    step = scale
    while step <= ROOT_BRACKET_LIMIT * scale:
        hi = start + direction * step
        g_hi = gap(hi)
        if g_hi == 0.0:
            return hi
        if math.copysign(1.0, g_hi) != math.copysign(1.0, g_lo):
            a, b = sorted((lo, hi))
            return float(brentq(gap, a, b, xtol=1e-13, maxiter=200))
        lo, g_lo = hi, g_hi
        step *= 2.0
    return None


def _stationary_points(fit: BinormalFit, log_target: float) -> List[float]:
    """Roots of log(slope(tau)) = log(target) on each monotone piece."""
    gap = _log_slope_gap(fit, log_target)
    scale = max(fit.sigma0, fit.sigma1)
    inv0, inv1 = 1.0 / fit.sigma0 ** 2, 1.0 / fit.sigma1 ** 2

    if inv0 == inv1:
        if fit.mu0 == fit.mu1:
            return []
        # log slope is linear in tau: one monotone piece
        center = 0.5 * (fit.mu0 + fit.mu1)
        roots = [_bracketed_root(gap, center, +1.0, scale),
                 _bracketed_root(gap, center, -1.0, scale)]
    else:
        # log slope is quadratic in tau: monotone on each side of its vertex
        vertex = (fit.mu1 * inv1 - fit.mu0 * inv0) / (inv1 - inv0)
        roots = [_bracketed_root(gap, vertex, +1.0, scale),
                 _bracketed_root(gap, vertex, -1.0, scale)]

    unique = []
    for root in roots:
        if root is not None and all(abs(root - r) > 1e-10 for r in unique):
            unique.append(root)
    return sorted(unique)


def optimal_threshold(fit: BinormalFit, priors: ClassPriors, losses: LossMatrix) -> float:
    """
    Threshold minimising the expected loss.

    Solves the stationarity condition slope(tau) = (l_fp/l_fn)(p_n/p_p) by
    bracketed root finding on log(slope); among the roots that are local
    minima the one with the smallest expected loss wins.

    Raises:
        NoInteriorOptimum: if no interior threshold beats the constant
            policies (always predict 0 or always predict 1)
    """
    log_target = _target_log_slope(priors, losses)
    candidates = [tau for tau in _stationary_points(fit, log_target)
                  if _log_slope_gradient(fit, tau) > 0]
    if not candidates:
        raise NoInteriorOptimum(
            f"no interior minimum of the expected loss for {fit} with l_fp/l_fn={losses.ratio}")

    best = min(candidates, key=lambda tau: expected_loss(tau, fit, priors, losses))
    best_loss = expected_loss(best, fit, priors, losses)
    constant_loss = min(losses.l_fp * priors.p_n, losses.l_fn * priors.p_p)
    if not best_loss < constant_loss:
        raise NoInteriorOptimum(
            f"a constant policy (loss {constant_loss:.6g}) is at least as good as "
            f"tau={best:.6g} (loss {best_loss:.6g})")

    logger.debug(f"Optimal threshold {best:.8f} for l_fp/l_fn={losses.ratio:.4f}")
    return best


def stationarity_gap(fit: BinormalFit, priors: ClassPriors, losses: LossMatrix,
                     tau: float) -> float:
    """Relative gap |slope(tau) - K| / K with K = (l_fp/l_fn)(p_n/p_p)."""
    target = losses.ratio * priors.p_n / priors.p_p
    return abs(roc_slope_parametric(fit, tau) - target) / target


def recover_loss_ratio(slope_at_tau_star: float, priors: ClassPriors) -> float:
    """L_FP / L_FN = slope * p_p / p_n."""
    if not (math.isfinite(slope_at_tau_star) and slope_at_tau_star > 0):
        raise NonPositiveSlope(f"ROC slope must be strictly positive, got {slope_at_tau_star}")
    return slope_at_tau_star * priors.p_p / priors.p_n


def ethics_vector_binary(fit: BinormalFit, tau_star: float) -> EthicsVector2D:
    """Binary Ethics2Vec embedding at tau_star."""
    d_tpr, d_fpr = parametric_derivatives(fit, tau_star)
    return EthicsVector2D(d_tpr_d_tau=d_tpr, d_fpr_d_tau=d_fpr, tau_star=float(tau_star))


def recover_operating_threshold(log: DecisionLog, tolerance: float) -> Tuple[float, float]:
    """
    Estimate the agent's threshold from its actions.

    The cut between consecutive distinct scores that disagrees with the
    fewest actions is chosen; the threshold is the midpoint between the
    largest action-0 score below the cut and the smallest action-1 score
    at or above it.

    Args:
        log: Decision log including the agent's actions
        tolerance: Largest tolerated fraction of actions that contradict the cut

    Returns:
        (tau_hat, violation_fraction)
    """
    n = len(log)
    n_ones = int(np.count_nonzero(log.actions))
    if n_ones == 0 or n_ones == n:
        raise NoInteriorOptimum(
            f"the agent took action {int(log.actions[0])} on every record; "
            "its threshold lies outside the observed scores")

    order = np.argsort(log.scores, kind="stable")
    scores = log.scores[order]
    actions = log.actions[order].astype(np.int64)

    # cut c predicts 0 for records [0, c) and 1 for [c, n)
    ones_before = np.concatenate(([0], np.cumsum(actions)))
    zeros_before = np.arange(n + 1) - ones_before
    violations = ones_before + (zeros_before[-1] - zeros_before)

    valid = np.ones(n + 1, dtype=bool)
    valid[1:n] = scores[1:] > scores[:-1]
    violations = np.where(valid, violations, n + 1)
    cut = int(np.argmin(violations))
    violation_fraction = violations[cut] / n

    if violation_fraction > tolerance:
        raise InconsistentActions(
            f"{violation_fraction:.2%} of actions contradict the best threshold rule "
            f"(tolerance {tolerance:.2%})")
    if cut == 0 or cut == n:
        raise NoInteriorOptimum("the best threshold rule is a constant policy")
    if violations[cut] > 0:
        logger.warning(f"{violations[cut]} of {n} actions contradict the recovered threshold "
                       f"({violation_fraction:.4%}, within tolerance)")

    below, above = scores[:cut], scores[cut:]
    below_zero = below[actions[:cut] == 0]
    above_one = above[actions[cut:] == 1]
    lower = below_zero[-1] if len(below_zero) else below[-1]
    upper = above_one[0] if len(above_one) else above[0]
    tau_hat = 0.5 * (float(lower) + float(upper))

    logger.info(f"Recovered operating threshold {tau_hat:.6f} "
                f"(consistent interval [{lower:.6f}, {upper:.6f}])")
    return tau_hat, float(violation_fraction)


def audit_binary_agent(log: DecisionLog, method: Union[AuditMethod, str, None] = None,
                       config: Optional[BinaryAuditConfig] = None) -> BinaryAuditResult:
    """
    Recover a binary agent's loss ratio and Ethics2Vec embedding from its log.

    Args:
        log: Scores, actions and true states of the audited interactions
        method: parametric (binormal fit) or nonparametric (local linear
            slopes of the empirical ROC); defaults to config.method
        config: Audit settings

    Returns:
        BinaryAuditResult with the recovered ratio, the embedding, the
        estimated threshold and diagnostics
    """
    config = config or BinaryAuditConfig()
    method = AuditMethod(method or config.method)

    priors = estimate_priors(log)
    negatives, positives = log.class_scores(0), log.class_scores(1)
    if negatives.max() < positives.min():
        # any threshold in the gap has FPR=0 and TPR=1, so no slope identifies the ratio
        raise FlatFprWindow(
            f"the classes do not overlap (largest truth=0 score {negatives.max():.6g} < "
            f"smallest truth=1 score {positives.min():.6g}); the ROC slope at the operating "
            "point is undefined")
    tau_hat, violation_fraction = recover_operating_threshold(log, config.consistency_tolerance)
    diagnostics = {
        "n_records": len(log),
        "n_negative": log.n_negative,
        "n_positive": log.n_positive,
        "p_n": priors.p_n,
        "p_p": priors.p_p,
        "violation_fraction": violation_fraction,
    }

    if method is AuditMethod.PARAMETRIC:
        fit = fit_binormal(log)
        ethics = ethics_vector_binary(fit, tau_hat)
        if abs(ethics.d_fpr_d_tau) < config.zero_tolerance:
            raise FlatFprWindow(
                f"dFPR/dtau={ethics.d_fpr_d_tau:.3g} at tau={tau_hat:.6g}: the operating point "
                "lies in a tail of the negative-class score distribution")
        slope = roc_slope_parametric(fit, tau_hat, paper_literal=config.paper_literal_slope)
        fpr, tpr = operating_point(fit, tau_hat)
        diagnostics.update({
            "mu0": fit.mu0, "sigma0": fit.sigma0, "mu1": fit.mu1, "sigma1": fit.sigma1,
            "paper_literal_slope": config.paper_literal_slope,
        })
        diagnostics["nonparametric_slope"] = _nonparametric_slope_or_reason(log, tau_hat, config)
    else:
        roc = build_empirical_roc(log)
        bandwidth = config.bandwidth or default_bandwidth(log, config.bandwidth_factor)
        d_tpr, d_fpr = nonparametric_derivatives(roc, tau_hat, bandwidth)
        if abs(d_fpr) < config.zero_tolerance:
            raise FlatFprWindow(f"dFPR/dtau estimate {d_fpr:.3g} is zero around tau={tau_hat:.6g}")
        ethics = EthicsVector2D(d_tpr_d_tau=d_tpr, d_fpr_d_tau=d_fpr, tau_star=tau_hat)
        slope = d_tpr / d_fpr
        fpr = float(np.mean(log.class_scores(0) >= tau_hat))
        tpr = float(np.mean(log.class_scores(1) >= tau_hat))
        diagnostics["bandwidth"] = bandwidth

    ratio = recover_loss_ratio(slope, priors)
    diagnostics.update({"slope": slope, "fpr_at_tau": fpr, "tpr_at_tau": tpr})

    logger.info(f"Recovered L_FP/L_FN = {ratio:.4f} ({method.value}, slope {slope:.4f})")
    return BinaryAuditResult(ratio=ratio, ethics=ethics, tau_star_estimate=tau_hat,
                             method=method, diagnostics=diagnostics)


def _nonparametric_slope_or_reason(log: DecisionLog, tau: float,
                                   config: BinaryAuditConfig) -> Union[float, str]:
    # side-by-side diagnostic only; failures here never stop a parametric audit
    try:
        roc = build_empirical_roc(log)
        bandwidth = config.bandwidth or default_bandwidth(log, config.bandwidth_factor)
        d_tpr, d_fpr = nonparametric_derivatives(roc, tau, bandwidth)
        if abs(d_fpr) < config.zero_tolerance:
            return "flat FPR window"
        return d_tpr / d_fpr
    except EthicsAuditError as e:
        return f"unavailable: {type(e).__name__}"
