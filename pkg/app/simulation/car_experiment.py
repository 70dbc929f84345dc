"""
The self-driving car experiment: ten speed control laws that trade the
risk of an accident against the risk of arriving late.

Law shapes and risk curves are explicit parametric stand-ins; every
parameter comes from CarExperimentConfig.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from scipy.special import expit

from app.config import (DESTINATION_KM, HORIZON_HOURS, HORIZON_TOLERANCE, N_LAWS, U_MAX_KMH,
                        AccidentParams, CarExperimentConfig, LatenessParams, LawParams)
from app.errors import DivisionByZeroSpeed, RangeViolation
from app.ethics.continuous_ethics import (aggregate_ethics_vector, coarse_ethics_trace,
                                          ethics_trace, per_step_residuals, simulate_trajectory,
                                          stationarity_residual, weight_ratio)
from app.models import ControlLaw, EthicsTrace, RiskModel, Trajectory, WeightMethod

logger = logging.getLogger(__name__)

ACCIDENT_RISK = "accident"
LATENESS_RISK = "lateness"

CAR_COLUMNS = [
    "law", "speed_at_origin", "arrival_time", "final_position", "E1", "E2", "coarse_E1",
    "coarse_E2", "ratio_of_sums", "paper_literal_sum_of_ratios", "coarse_paper_literal",
    "stationarity_residual", "max_per_step_residual", "derivative_mass",
]


@dataclass(frozen=True)
class LawRun:
    """Everything computed for one control law."""

    law: ControlLaw
    trajectory: Trajectory
    trace: EthicsTrace
    coarse_trace: EthicsTrace
    row: Dict[str, Optional[float]]


@dataclass(frozen=True)
class CarExperimentResult:
    table: pd.DataFrame
    runs: List[LawRun]


def _linear_decay_law(u_start: float, u_min: float, destination: float) -> Callable[[float], float]:
    def law(x: float) -> float:
        progress = min(max(x / destination, 0.0), 1.0)
        return u_min + (u_start - u_min) * (1.0 - progress)
    return law


def default_control_laws(params: Optional[LawParams] = None, destination: float = DESTINATION_KM,
                         n_laws: int = N_LAWS, u_max: float = U_MAX_KMH) -> List[ControlLaw]:
    """
    The control law family u_i(x) = u_min + (U_i - u_min)(1 - x/destination).

    U_i = u_start - u_decrement*(i-1) unless params.speeds_at_origin lists
    them explicitly. Law 1 is the most aggressive: for i < j, u_i(x) >= u_j(x).
    """
    params = params or LawParams()
    if params.speeds_at_origin is not None:
        starts = [float(u) for u in params.speeds_at_origin]
    else:
        starts = [params.u_start - params.u_decrement * i for i in range(n_laws)]

    laws = []
    for i, u_start in enumerate(starts, start=1):
        for speed in (u_start, params.u_min):
            if not 0 <= speed <= u_max:
                raise RangeViolation(f"law {i} reaches speed {speed} km/h, outside [0, {u_max}]")
        laws.append(ControlLaw(id=i, law=_linear_decay_law(u_start, params.u_min, destination),
                               u_max=u_max))
    return laws


def accident_risk_model(params: Optional[AccidentParams] = None) -> RiskModel:
    """Logistic accident probability r1(u) = 1/(1 + exp(-k(u - u0))); depends on u only."""
    params = params or AccidentParams()
    k, u0 = params.k, params.u0

    def evaluate(x: float, u: float, t: float) -> float:
        return float(expit(k * (u - u0)))

    def derivative(x: float, u: float, t: float) -> float:
        r = expit(k * (u - u0))
        return float(k * r * (1.0 - r))

    return RiskModel(name=ACCIDENT_RISK, evaluate=evaluate, analytic_derivative=derivative)


def lateness_risk_model(params: Optional[LatenessParams] = None, destination: float = DESTINATION_KM,
                        horizon_T: float = HORIZON_HOURS) -> RiskModel:
    """
    Logistic probability of arriving late, driven by the gap between the
    time needed at the current speed, (destination - x)/u, and the time
    left, T - t.

    The risk is 0 once the destination is reached and 1 for a stalled car.
    """
    params = params or LatenessParams()
    a = params.a

    def _arrived(x: float) -> bool:
        return x >= destination - HORIZON_TOLERANCE

    def evaluate(x: float, u: float, t: float) -> float:
        if _arrived(x):
            return 0.0
        if u <= 0:
            return 1.0
        gap = (destination - x) / u - (horizon_T - t)
        return float(expit(a * gap))

    def derivative(x: float, u: float, t: float) -> float:
        if _arrived(x):
            return 0.0
        if u <= 0:
            raise DivisionByZeroSpeed(f"speed {u} km/h at x={x} km before arrival")
        remaining = destination - x
        r = expit(a * (remaining / u - (horizon_T - t)))
        return float(-a * r * (1.0 - r) * remaining / u ** 2)

    return RiskModel(name=LATENESS_RISK, evaluate=evaluate, analytic_derivative=derivative)


def car_risk_models(config: CarExperimentConfig) -> List[RiskModel]:
    """[accident, lateness] as configured."""
    return [
        accident_risk_model(config.accident_params),
        lateness_risk_model(config.lateness_params, config.destination, config.horizon_T),
    ]


def _literal_or_none(trace: EthicsTrace) -> Optional[float]:
    try:
        return weight_ratio(trace, WeightMethod.PAPER_LITERAL_SUM_OF_RATIOS).value
    except ValueError as e:
        logger.warning(f"Literal weight ratio unavailable: {e}")
        return None


def analyse_trajectory(trajectory: Trajectory, risks: List[RiskModel],
                       config: CarExperimentConfig) -> Tuple[EthicsTrace, EthicsTrace, Dict[str, Optional[float]]]:
    """
    Ethics trace, hourly trace and summary numbers of one trajectory.

    Returns:
        (trace, coarse_trace, summary) where summary holds the aggregate
        vector, both weight ratios and the stationarity residual
    """
    trace = ethics_trace(trajectory, risks, config.derivative_step, config.u_max)
    coarse = coarse_ethics_trace(trajectory, risks, 1.0, config.derivative_step, config.u_max)
    e1, e2 = aggregate_ethics_vector(trace)
    coarse_e1, coarse_e2 = aggregate_ethics_vector(coarse) if len(coarse) else (None, None)

    ratio = weight_ratio(trace, WeightMethod.RATIO_OF_SUMS).value
    summary = {
        "arrival_time": trajectory.arrival_time,
        "final_position": trajectory.final_position,
        "E1": float(e1),
        "E2": float(e2),
        "coarse_E1": None if coarse_e1 is None else float(coarse_e1),
        "coarse_E2": None if coarse_e2 is None else float(coarse_e2),
        "ratio_of_sums": ratio,
        "paper_literal_sum_of_ratios": _literal_or_none(trace),
        "coarse_paper_literal": _literal_or_none(coarse) if len(coarse) else None,
        "stationarity_residual": stationarity_residual(trace, ratio),
        "max_per_step_residual": float(np.max(np.abs(per_step_residuals(trace, ratio)))),
        "derivative_mass": float(np.abs(trace.vectors).sum()),
    }
    return trace, coarse, summary


def _run_law(law: ControlLaw, risks: List[RiskModel], config: CarExperimentConfig) -> LawRun:
    trajectory = simulate_trajectory(law, config.horizon_T, config.dt, config.destination)
    trace, coarse, summary = analyse_trajectory(trajectory, risks, config)
    row = {"law": law.id, "speed_at_origin": float(law(0.0)), **summary}
    logger.debug(f"Law {law.id}: E=({summary['E1']:.6g}, {summary['E2']:.6g}), "
                 f"w1/w2={summary['ratio_of_sums']:.6g}")
    return LawRun(law=law, trajectory=trajectory, trace=trace, coarse_trace=coarse, row=row)


def run_car_experiment(config: Optional[CarExperimentConfig] = None,
                       threads: int = 1) -> CarExperimentResult:
    """
    Simulate every control law and recover its Ethics2Vec point and weight ratio.

    Args:
        config: Car experiment settings
        threads: Worker threads for the per-law runs

    Returns:
        CarExperimentResult with one table row per law, in law order
    """
    config = config or CarExperimentConfig()
    laws = default_control_laws(config.law_params, config.destination, config.n_laws, config.u_max)
    risks = car_risk_models(config)

    logger.info(f"Simulating {len(laws)} control laws on {threads} thread(s)")
    runs = Parallel(n_jobs=threads, prefer="threads")(
        delayed(_run_law)(law, risks, config) for law in laws
    )

    table = pd.DataFrame([run.row for run in runs], columns=CAR_COLUMNS)
    arrived = int(table["arrival_time"].notna().sum())
    logger.info(f"Car experiment: {arrived} of {len(laws)} laws arrive before T={config.horizon_T} h")
    return CarExperimentResult(table=table, runs=list(runs))
