"""
Ethics2Vec for continuous-action agents.

For a control law u = K(x), E(t) collects the derivatives of each risk
probability with respect to the action at the applied action. If the law
minimises a weighted sum of risks, the weights must satisfy
sum_t W . E(t) = 0, which fixes w1/w2 when there are two risks.
"""

import logging
from typing import List, Optional, Sequence, Union

import numpy as np

from app.config import DERIVATIVE_STEP_KMH, HORIZON_TOLERANCE, U_MAX_KMH, ZERO_TOLERANCE
from app.errors import (DegenerateDenominator, EmptyTrace, InvalidHorizon, NotTwoRisks,
                        RangeViolation)
from app.models import ControlLaw, EthicsTrace, RiskModel, Trajectory, WeightMethod, WeightRatio

logger = logging.getLogger(__name__)


def simulate_trajectory(law: ControlLaw, horizon_T: float, dt: float,
                        destination: float) -> Trajectory:
    """
    Euler-integrate x(k+1) = x(k) + law(x(k)) * dt from x(0) = 0.

    Records run from t = 0 to t = horizon_T inclusive. The step that reaches
    the destination applies exactly the speed needed to land on it; every
    later record holds x at the destination with u = 0.

    Raises:
        InvalidHorizon: if horizon_T is not a positive multiple of dt
        RangeViolation: if the law leaves [0, u_max]
    """
    if not dt > 0 or not horizon_T > 0 or not destination > 0:
        raise InvalidHorizon(f"need dt > 0, T > 0 and destination > 0, got "
                             f"dt={dt}, T={horizon_T}, destination={destination}")
    n_steps = int(round(horizon_T / dt))
    if n_steps < 1 or abs(n_steps * dt - horizon_T) > HORIZON_TOLERANCE:
        raise InvalidHorizon(f"T={horizon_T} is not a multiple of dt={dt}")

    times = np.arange(n_steps + 1) * dt
    positions = np.zeros(n_steps + 1)
    speeds = np.zeros(n_steps + 1)
    arrived = np.zeros(n_steps + 1, dtype=bool)

    x = 0.0
    has_arrived = False
    for k in range(n_steps + 1):
        positions[k] = x
        arrived[k] = has_arrived
        if has_arrived:
            continue
        u = float(law(x))
        if not 0.0 <= u <= law.u_max:
            raise RangeViolation(f"law {law.id} returned u={u} at x={x}, outside [0, {law.u_max}]")
        if k < n_steps and x + u * dt >= destination - HORIZON_TOLERANCE:
            u = (destination - x) / dt
            x = destination
            has_arrived = True
            logger.debug(f"Law {law.id} arrives at t={times[k + 1]:.4f} h")
        elif k < n_steps:
            x = x + u * dt
        speeds[k] = u

    trajectory = Trajectory(times=times, positions=positions, speeds=speeds, arrived=arrived,
                            dt=dt, destination=destination)
    logger.info(f"Simulated law {law.id}: final x={trajectory.final_position:.3f} km, "
                f"arrival={trajectory.arrival_time}")
    return trajectory


def risk_derivative(model: RiskModel, x: float, u: float, t: float,
                    h: float = DERIVATIVE_STEP_KMH, u_max: float = U_MAX_KMH) -> float:
    """
    d r / d u at (x, u, t): the model's analytic derivative when it has one,
    a central difference with step h otherwise.

    Raises:
        RangeViolation: if u - h or u + h leaves [0, u_max]
    """
    if not h > 0:
        raise ValueError(f"step h must be positive, got {h}")
    if u - h < 0 or u + h > u_max:
        raise RangeViolation(f"u={u} with step h={h} leaves the operating range [0, {u_max}]")
    if model.analytic_derivative is not None:
        return float(model.analytic_derivative(x, u, t))
    return (model.evaluate(x, u + h, t) - model.evaluate(x, u - h, t)) / (2.0 * h)


def ethics_trace(trajectory: Trajectory, risks: Sequence[RiskModel],
                 h: float = DERIVATIVE_STEP_KMH, u_max: float = U_MAX_KMH,
                 indices: Optional[Sequence[int]] = None) -> EthicsTrace:
    """
    E(t_k)[i] = d r_i / d u at every record of the trajectory.

    Arrived records contribute the zero vector.
    """
    indices = range(len(trajectory)) if indices is None else indices
    vectors = np.zeros((len(indices), len(risks)))
    for row, k in enumerate(indices):
        if trajectory.arrived[k]:
            continue
        x, u, t = trajectory.positions[k], trajectory.speeds[k], trajectory.times[k]
        # keep the difference stencil inside [0, u_max] on slow arrival steps
        step = min(h, 0.5 * u, 0.5 * (u_max - u)) if 0 < u < u_max else h
        for i, model in enumerate(risks):
            vectors[row, i] = risk_derivative(model, x, u, t, step, u_max)

    return EthicsTrace(vectors=vectors, risk_names=tuple(r.name for r in risks),
                       times=trajectory.times[list(indices)])


def coarse_ethics_trace(trajectory: Trajectory, risks: Sequence[RiskModel], every: float = 1.0,
                        h: float = DERIVATIVE_STEP_KMH, u_max: float = U_MAX_KMH) -> EthicsTrace:
    """E(t) sampled only at t = every, 2*every, ... up to the horizon."""
    periods = trajectory.times / every
    on_grid = (np.abs(periods - np.round(periods)) < HORIZON_TOLERANCE) & (np.round(periods) >= 1)
    return ethics_trace(trajectory, risks, h, u_max, indices=np.flatnonzero(on_grid).tolist())


def aggregate_ethics_vector(trace: EthicsTrace) -> np.ndarray:
    """Componentwise mean of E(t) over all steps."""
    if len(trace) == 0:
        raise EmptyTrace("cannot average an empty trace")
    return trace.vectors.mean(axis=0)


def weight_constraint(trace: EthicsTrace) -> np.ndarray:
    """Coefficients of the linear constraint W . sum_t E(t) = 0, for any number of risks."""
    if len(trace) == 0:
        raise EmptyTrace("cannot build a constraint from an empty trace")
    return trace.vectors.sum(axis=0)


def weight_ratio(trace: EthicsTrace,
                 method: Union[WeightMethod, str] = WeightMethod.RATIO_OF_SUMS,
                 tolerance: float = ZERO_TOLERANCE) -> WeightRatio:
    """
    Relative weight w1/w2 of the first risk against the second.

    ratio_of_sums solves sum_t (w1 E1(t) + w2 E2(t)) = 0 exactly.
    paper_literal_sum_of_ratios returns -sum_t E2(t)/E1(t); steps where both
    components are zero (no action) are skipped.

    Raises:
        NotTwoRisks, DegenerateDenominator
    """
    method = WeightMethod(method)
    if trace.n_risks != 2:
        raise NotTwoRisks(f"weight ratios need exactly 2 risks, the trace has {trace.n_risks}")
    if len(trace) == 0:
        raise EmptyTrace("cannot compute a weight ratio from an empty trace")

    e1, e2 = trace.vectors[:, 0], trace.vectors[:, 1]
    if method is WeightMethod.RATIO_OF_SUMS:
        denominator = e1.sum()
        if abs(denominator) < tolerance:
            raise DegenerateDenominator(f"sum of {trace.risk_names[0]} derivatives is {denominator:.3g}")
        value = -e2.sum() / denominator
    else:
        active = (e1 != 0) | (e2 != 0)
        if not np.any(active):
            raise DegenerateDenominator("every step has a zero E(t)")
        if np.any(np.abs(e1[active]) < tolerance):
            raise DegenerateDenominator(f"some {trace.risk_names[0]} derivatives are zero")
        value = -np.sum(e2[active] / e1[active])

    return WeightRatio(value=float(value), method=method)


def stationarity_residual(trace: EthicsTrace, ratio: float) -> float:
    """|sum_t (ratio * E1(t) + E2(t))|, zero when (w1, w2) = (ratio, 1) is stationary."""
    return float(abs(np.sum(ratio * trace.vectors[:, 0] + trace.vectors[:, 1])))


def per_step_residuals(trace: EthicsTrace, ratio: float) -> List[float]:
    """ratio * E1(t) + E2(t) for every step; all zero only under per-step stationarity."""
    return (ratio * trace.vectors[:, 0] + trace.vectors[:, 1]).tolist()
