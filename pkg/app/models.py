"""
Domain types shared by the ROC, ethics, simulation and reporting modules.

All types are frozen dataclasses; array-valued fields are stored as
read-only numpy arrays so instances can be shared between worker threads.
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

PRIOR_SUM_TOLERANCE = 1e-12
EULER_TOLERANCE = 1e-9


def _frozen_array(values, dtype) -> np.ndarray:
    array = np.array(values, dtype=dtype, copy=True)
    array.setflags(write=False)
    return array


class AuditMethod(str, Enum):
    PARAMETRIC = "parametric"
    NONPARAMETRIC = "nonparametric"


class WeightMethod(str, Enum):
    RATIO_OF_SUMS = "ratio_of_sums"
    PAPER_LITERAL_SUM_OF_RATIOS = "paper_literal_sum_of_ratios"


@dataclass(frozen=True, eq=False)
class DecisionLog:
    """
    Per-interaction records of a binary agent: its internal score, the action
    it took and the true state.
    """

    scores: np.ndarray
    actions: np.ndarray
    truths: np.ndarray

    def __post_init__(self):
        scores = _frozen_array(self.scores, float)
        actions = _frozen_array(self.actions, np.int8)
        truths = _frozen_array(self.truths, np.int8)

        if scores.ndim != 1 or not (len(scores) == len(actions) == len(truths)):
            raise ValueError("scores, actions and truths must be 1-D and of equal length")
        if not np.all(np.isfinite(scores)):
            raise ValueError("all scores must be finite")
        if not np.all(np.isin(np.asarray(self.actions), (0, 1))):
            raise ValueError("actions must be 0 or 1")
        if not np.all(np.isin(np.asarray(self.truths), (0, 1))):
            raise ValueError("truths must be 0 or 1")

        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "actions", actions)
        object.__setattr__(self, "truths", truths)

    @classmethod
    def from_records(cls, records: Sequence[Tuple[float, int, int]]) -> "DecisionLog":
        if len(records) == 0:
            return cls(np.empty(0), np.empty(0, dtype=np.int8), np.empty(0, dtype=np.int8))
        scores, actions, truths = zip(*records)
        return cls(np.asarray(scores, float), np.asarray(actions), np.asarray(truths))

    @property
    def records(self) -> List[Tuple[float, int, int]]:
        return [(float(s), int(a), int(y))
                for s, a, y in zip(self.scores, self.actions, self.truths)]

    @property
    def n_negative(self) -> int:
        return int(np.count_nonzero(self.truths == 0))

    @property
    def n_positive(self) -> int:
        return int(np.count_nonzero(self.truths == 1))

    def class_scores(self, truth: int) -> np.ndarray:
        return self.scores[self.truths == truth]

    def __len__(self) -> int:
        return len(self.scores)

    def __eq__(self, other) -> bool:
        if not isinstance(other, DecisionLog):
            return NotImplemented
        return (np.array_equal(self.scores, other.scores)
                and np.array_equal(self.actions, other.actions)
                and np.array_equal(self.truths, other.truths))

    __hash__ = None


@dataclass(frozen=True)
class ClassPriors:
    p_n: float
    p_p: float

    def __post_init__(self):
        if not (self.p_n > 0 and self.p_p > 0):
            raise ValueError(f"class priors must be positive, got p_n={self.p_n}, p_p={self.p_p}")
        if abs(self.p_n + self.p_p - 1.0) > PRIOR_SUM_TOLERANCE:
            raise ValueError(f"class priors must sum to 1, got {self.p_n + self.p_p}")

    @classmethod
    def from_positive_rate(cls, p_p: float) -> "ClassPriors":
        return cls(p_n=1.0 - p_p, p_p=p_p)


@dataclass(frozen=True, eq=False)
class RocCurve:
    """
    Operating characteristic sampled at ascending thresholds.

    fpr and tpr are survival functions of the class-conditional scores, so
    both are non-increasing in tau.
    """

    taus: np.ndarray
    fprs: np.ndarray
    tprs: np.ndarray

    def __post_init__(self):
        taus = _frozen_array(self.taus, float)
        fprs = _frozen_array(self.fprs, float)
        tprs = _frozen_array(self.tprs, float)

        if taus.ndim != 1 or not (len(taus) == len(fprs) == len(tprs)):
            raise ValueError("taus, fprs and tprs must be 1-D and of equal length")
        if len(taus) == 0:
            raise ValueError("a ROC curve needs at least one point")
        if np.any(np.diff(taus) <= 0):
            raise ValueError("taus must be strictly increasing")
        for name, rates in (("fpr", fprs), ("tpr", tprs)):
            if np.any(rates < 0) or np.any(rates > 1):
                raise ValueError(f"{name} values must lie in [0, 1]")
            if np.any(np.diff(rates) > 0):
                raise ValueError(f"{name} must be non-increasing in tau")

        object.__setattr__(self, "taus", taus)
        object.__setattr__(self, "fprs", fprs)
        object.__setattr__(self, "tprs", tprs)

    @property
    def points(self) -> List[Tuple[float, float, float]]:
        return [(float(t), float(f), float(p)) for t, f, p in zip(self.taus, self.fprs, self.tprs)]

    def __len__(self) -> int:
        return len(self.taus)

    __hash__ = None


@dataclass(frozen=True)
class BinormalFit:
    mu0: float
    sigma0: float
    mu1: float
    sigma1: float

    def __post_init__(self):
        values = (self.mu0, self.sigma0, self.mu1, self.sigma1)
        if not all(math.isfinite(v) for v in values):
            raise ValueError(f"binormal parameters must be finite, got {values}")
        if self.sigma0 <= 0 or self.sigma1 <= 0:
            raise ValueError(f"binormal standard deviations must be positive, got {values}")


@dataclass(frozen=True)
class LossMatrix:
    """Losses of a false positive and a false negative; correct actions cost 0."""

    l_fp: float
    l_fn: float

    def __post_init__(self):
        if not (self.l_fp > 0 and self.l_fn > 0):
            raise ValueError(f"losses must be positive, got l_fp={self.l_fp}, l_fn={self.l_fn}")

    @classmethod
    def from_ratio(cls, ratio: float) -> "LossMatrix":
        return cls(l_fp=float(ratio), l_fn=1.0)

    @property
    def ratio(self) -> float:
        return self.l_fp / self.l_fn


@dataclass(frozen=True)
class EthicsVector2D:
    """Binary Ethics2Vec embedding [dTPR/dtau, dFPR/dtau] at the agent's threshold."""

    d_tpr_d_tau: float
    d_fpr_d_tau: float
    tau_star: float

    def __post_init__(self):
        if not math.isfinite(self.tau_star):
            raise ValueError("tau_star must be finite")

    @property
    def slope(self) -> float:
        return self.d_tpr_d_tau / self.d_fpr_d_tau

    def as_list(self) -> List[float]:
        return [self.d_tpr_d_tau, self.d_fpr_d_tau]


@dataclass(frozen=True)
class BinaryAuditResult:
    ratio: float
    ethics: EthicsVector2D
    tau_star_estimate: float
    method: AuditMethod
    diagnostics: Dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class ControlLaw:
    """Speed control law u = law(x), x in km, u in km/h."""

    id: int
    law: Callable[[float], float]
    u_max: float = 200.0

    def __call__(self, x: float) -> float:
        return self.law(x)


@dataclass(frozen=True)
class RiskModel:
    """
    Probability of an adverse event given state x, action u and time t.

    evaluate and analytic_derivative must be reentrant: no mutable state.
    """

    name: str
    evaluate: Callable[[float, float, float], float]
    analytic_derivative: Optional[Callable[[float, float, float], float]] = None


@dataclass(frozen=True, eq=False)
class Trajectory:
    """
    Euler-integrated trajectory; record k holds the state at t = k*dt and
    the action applied from there. The last record is the state at the horizon.
    """

    times: np.ndarray
    positions: np.ndarray
    speeds: np.ndarray
    arrived: np.ndarray
    dt: float
    destination: float

    def __post_init__(self):
        times = _frozen_array(self.times, float)
        positions = _frozen_array(self.positions, float)
        speeds = _frozen_array(self.speeds, float)
        arrived = _frozen_array(self.arrived, bool)

        if not (len(times) == len(positions) == len(speeds) == len(arrived)) or len(times) == 0:
            raise ValueError("trajectory arrays must be non-empty and of equal length")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        steps = np.diff(times)
        if np.any(steps <= 0) or np.any(np.abs(steps - self.dt) > EULER_TOLERANCE):
            raise ValueError("times must increase with uniform spacing dt")
        if np.any(np.diff(positions) < -EULER_TOLERANCE):
            raise ValueError("positions must be non-decreasing")
        drift = positions[1:] - (positions[:-1] + speeds[:-1] * self.dt)
        if np.any(np.abs(drift) > EULER_TOLERANCE):
            raise ValueError("positions must satisfy x(k+1) = x(k) + u(k)*dt")

        object.__setattr__(self, "times", times)
        object.__setattr__(self, "positions", positions)
        object.__setattr__(self, "speeds", speeds)
        object.__setattr__(self, "arrived", arrived)

    @property
    def steps(self) -> List[Tuple[float, float, float]]:
        return [(float(t), float(x), float(u))
                for t, x, u in zip(self.times, self.positions, self.speeds)]

    @property
    def final_position(self) -> float:
        return float(self.positions[-1])

    @property
    def arrival_time(self) -> Optional[float]:
        hits = np.flatnonzero(self.arrived)
        return float(self.times[hits[0]]) if len(hits) else None

    def __len__(self) -> int:
        return len(self.times)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class EthicsTrace:
    """Per-step risk-derivative vectors E(t), one row per step and one column per risk."""

    vectors: np.ndarray
    risk_names: Tuple[str, ...]
    times: Optional[np.ndarray] = None

    def __post_init__(self):
        vectors = _frozen_array(self.vectors, float)
        if vectors.ndim == 1 and vectors.size == 0:
            vectors = vectors.reshape(0, len(self.risk_names))
        if vectors.ndim != 2 or vectors.shape[1] != len(self.risk_names):
            raise ValueError("every E(t) vector must have one entry per risk")
        if not np.all(np.isfinite(vectors)):
            raise ValueError("E(t) entries must be finite")
        object.__setattr__(self, "vectors", vectors)
        object.__setattr__(self, "risk_names", tuple(self.risk_names))
        if self.times is not None:
            object.__setattr__(self, "times", _frozen_array(self.times, float))

    @property
    def n_risks(self) -> int:
        return len(self.risk_names)

    def __len__(self) -> int:
        return self.vectors.shape[0]

    __hash__ = None


@dataclass(frozen=True)
class WeightRatio:
    value: float
    method: WeightMethod

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise ValueError("weight ratio must be finite")


@dataclass(frozen=True)
class AuditReport:
    """
    Everything one CLI run produced. config_echo is the fully resolved
    configuration, so re-running from it reproduces every number.
    """

    agent_id: str
    method: str
    recovered_ratio: Optional[float]
    ethics_vector: List[float]
    weight_ratio: Optional[Dict[str, float]]
    diagnostics: List[Tuple[str, Any]]
    config_echo: Dict[str, Any]
    seed: int
    metadata: Dict[str, Any] = field(default_factory=dict)
    results: List[Dict[str, Any]] = field(default_factory=list)
