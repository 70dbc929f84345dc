"""
Configuration module for the Ethics2Vec audit toolkit.
Contains all constant values used throughout the application and the
hierarchical run configuration built from them.
"""

import os
from dataclasses import asdict, dataclass, field, fields, is_dataclass, replace
from typing import Any, Dict, List, Optional

import yaml

from app.errors import ConfigError

# Application
APP_TITLE = "Ethics2Vec Audit"
APP_DESCRIPTION = ("Recover the implicit loss weights of black-box decision agents "
                   "from their observed behaviour.")
APP_VERSION = "1.0.0"

# Randomness
DEFAULT_SEED = 20230901
RNG_ALGORITHM = "PCG64"

# Parallelism
THREADS_ENV_VAR = "ETHICS_AUDIT_THREADS"

# Numerical tolerances
ZERO_TOLERANCE = 1e-12          # |denominator| below this is treated as zero
HORIZON_TOLERANCE = 1e-9        # T must be a multiple of dt within this

# Binary audit
DEFAULT_METHOD = "parametric"
BANDWIDTH_FACTOR = 0.25         # nonparametric window = factor * std(scores)
CONSISTENCY_TOLERANCE = 0.001   # tolerated fraction of non-threshold actions
MIN_WINDOW_POINTS = 3
ROOT_BRACKET_LIMIT = 1e3        # threshold search stops this many sigmas away

# Binary experiment (20 agents with known loss ratios)
DEFAULT_RATIOS = [
    0.10, 0.14, 0.19, 0.23, 0.28, 0.32, 0.37, 0.41, 0.46, 0.50,
    2.00, 2.33, 2.67, 3.00, 3.33, 3.67, 4.00, 4.33, 4.67, 5.00,
]
N_PER_AGENT = 100_000
MIN_N_PER_AGENT = 100
GENERATOR_FIT = {"mu0": 0.0, "sigma0": 1.0, "mu1": 1.0, "sigma1": 1.0}
GENERATOR_PRIORS = {"p_n": 0.5, "p_p": 0.5}

# Car experiment
DESTINATION_KM = 250.0
HORIZON_HOURS = 4.0
DT_HOURS = 0.01
U_MAX_KMH = 200.0
DERIVATIVE_STEP_KMH = 1e-3
N_LAWS = 10
LAW_U_MIN = 40.0                # speed every law decays to at the destination
LAW_U_START = 130.0             # speed of law 1 at x = 0
LAW_U_DECREMENT = 6.0           # each later law starts this much slower
ACCIDENT_K = 0.08               # logistic steepness, per km/h
ACCIDENT_U0 = 110.0             # speed with 50% accident risk, km/h
LATENESS_A = 3.0                # logistic steepness, per hour
DEFAULT_WEIGHT_METHOD = "ratio_of_sums"

# Output
REPORT_SUFFIX = "_report.yaml"
ROC_HEADER = ["tau", "fpr", "tpr"]
LOG_HEADER = ["score", "action", "truth"]
TRAJECTORY_HEADER = ["t", "x", "u"]
DB_TABLES = ["audit_runs"]


@dataclass(frozen=True)
class FitParams:
    mu0: float = GENERATOR_FIT["mu0"]
    sigma0: float = GENERATOR_FIT["sigma0"]
    mu1: float = GENERATOR_FIT["mu1"]
    sigma1: float = GENERATOR_FIT["sigma1"]


@dataclass(frozen=True)
class PriorParams:
    p_n: float = GENERATOR_PRIORS["p_n"]
    p_p: float = GENERATOR_PRIORS["p_p"]


@dataclass(frozen=True)
class BinaryAuditConfig:
    method: str = DEFAULT_METHOD
    paper_literal_slope: bool = False
    bandwidth: Optional[float] = None
    bandwidth_factor: float = BANDWIDTH_FACTOR
    consistency_tolerance: float = CONSISTENCY_TOLERANCE
    zero_tolerance: float = ZERO_TOLERANCE


@dataclass(frozen=True)
class BinaryExperimentConfig:
    ratios: List[float] = field(default_factory=lambda: list(DEFAULT_RATIOS))
    n_per_agent: int = N_PER_AGENT
    fit: FitParams = field(default_factory=FitParams)
    priors: PriorParams = field(default_factory=PriorParams)
    seed: int = DEFAULT_SEED


@dataclass(frozen=True)
class LawParams:
    u_min: float = LAW_U_MIN
    u_start: float = LAW_U_START
    u_decrement: float = LAW_U_DECREMENT
    # explicit speeds at x=0, one per law; overrides u_start/u_decrement
    speeds_at_origin: Optional[List[float]] = None


@dataclass(frozen=True)
class AccidentParams:
    k: float = ACCIDENT_K
    u0: float = ACCIDENT_U0


@dataclass(frozen=True)
class LatenessParams:
    a: float = LATENESS_A


@dataclass(frozen=True)
class CarExperimentConfig:
    destination: float = DESTINATION_KM
    horizon_T: float = HORIZON_HOURS
    dt: float = DT_HOURS
    u_max: float = U_MAX_KMH
    derivative_step: float = DERIVATIVE_STEP_KMH
    n_laws: int = N_LAWS
    law_params: LawParams = field(default_factory=LawParams)
    accident_params: AccidentParams = field(default_factory=AccidentParams)
    lateness_params: LatenessParams = field(default_factory=LatenessParams)
    weight_method: str = DEFAULT_WEIGHT_METHOD
    seed: int = DEFAULT_SEED


@dataclass(frozen=True)
class AppConfig:
    seed: int = DEFAULT_SEED
    threads: Optional[int] = None
    out_dir: str = "results"
    binary: BinaryAuditConfig = field(default_factory=BinaryAuditConfig)
    experiment_binary: BinaryExperimentConfig = field(default_factory=BinaryExperimentConfig)
    car: CarExperimentConfig = field(default_factory=CarExperimentConfig)


def _check_type(value: Any, default: Any, key_path: str) -> Any:
    """Coerce a YAML scalar to the type of its default, or raise ConfigError."""
    if default is None or value is None:
        return value
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"expected true/false, got {value!r}", key_path)
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"expected an integer, got {value!r}", key_path)
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"expected a number, got {value!r}", key_path)
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"expected a string, got {value!r}", key_path)
        return value
    if isinstance(default, list):
        if not isinstance(value, list):
            raise ConfigError(f"expected a list, got {value!r}", key_path)
        # every list setting holds numbers
        if any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in value):
            raise ConfigError(f"expected a list of numbers, got {value!r}", key_path)
        return [float(v) for v in value]
    return value


def _merge(instance: Any, overrides: Dict[str, Any], prefix: str = "") -> Any:
    if overrides is None:
        return instance
    if not isinstance(overrides, dict):
        raise ConfigError(f"expected a mapping, got {overrides!r}", prefix or None)

    known = {f.name: f for f in fields(instance)}
    changes = {}
    for key, value in overrides.items():
        key_path = f"{prefix}.{key}" if prefix else str(key)
        if key not in known:
            raise ConfigError("unknown key", key_path)
        current = getattr(instance, key)
        if is_dataclass(current):
            changes[key] = _merge(current, value, key_path)
        elif current is None:
            changes[key] = _check_type(value, _OPTIONAL_KINDS.get(key), key_path)
        else:
            changes[key] = _check_type(value, current, key_path)
    return replace(instance, **changes)


# Type templates for keys whose default is None
_OPTIONAL_KINDS = {"bandwidth": 0.0, "speeds_at_origin": [], "threads": 0}
_SEEDED_SECTIONS = ("experiment_binary", "car")


def _spread_seed(data: Dict[str, Any], force: bool = False) -> Dict[str, Any]:
    """Copy a top-level seed into every seeded section that does not pin its own."""
    if not isinstance(data, dict) or "seed" not in data:
        return data
    data = dict(data)
    for section in _SEEDED_SECTIONS:
        values = dict(data.get(section) or {})
        if force or "seed" not in values:
            values["seed"] = data["seed"]
        data[section] = values
    return data


def load_config(path: Optional[str] = None, overrides: Optional[Dict[str, Any]] = None) -> AppConfig:
    """
    Build the run configuration.

    Args:
        path: Optional YAML file; partial files are merged over the defaults
        overrides: Optional nested mapping applied after the file (CLI flags)

    Returns:
        AppConfig with every value resolved
    """
    config = AppConfig()
    if path is not None:
        try:
            with open(path, "r", encoding="utf-8") as f:
                data = yaml.safe_load(f) or {}
        except OSError as e:
            raise ConfigError(f"cannot read config file: {e}", str(path))
        except yaml.YAMLError as e:
            raise ConfigError(f"invalid YAML: {e}", str(path))
        config = _merge(config, _spread_seed(data))
    if overrides:
        # a --seed flag wins over seeds pinned in the file
        config = _merge(config, _spread_seed(overrides, force=True))
    return validate_config(config)


def validate_config(config: AppConfig) -> AppConfig:
    """Check value ranges that types alone cannot express."""
    if config.binary.method not in ("parametric", "nonparametric"):
        raise ConfigError(f"must be 'parametric' or 'nonparametric', got {config.binary.method!r}",
                          "binary.method")
    if config.binary.bandwidth is not None and config.binary.bandwidth <= 0:
        raise ConfigError("must be positive", "binary.bandwidth")
    if not 0 <= config.binary.consistency_tolerance < 1:
        raise ConfigError("must lie in [0, 1)", "binary.consistency_tolerance")
    if config.threads is not None and config.threads < 1:
        raise ConfigError("must be at least 1", "threads")

    experiment = config.experiment_binary
    if not experiment.ratios or any(r <= 0 for r in experiment.ratios):
        raise ConfigError("must be a non-empty list of positive numbers", "experiment_binary.ratios")
    if experiment.n_per_agent < MIN_N_PER_AGENT:
        raise ConfigError(f"must be at least {MIN_N_PER_AGENT}", "experiment_binary.n_per_agent")
    if experiment.fit.sigma0 <= 0 or experiment.fit.sigma1 <= 0:
        raise ConfigError("standard deviations must be positive", "experiment_binary.fit")
    priors = experiment.priors
    if priors.p_n <= 0 or priors.p_p <= 0 or abs(priors.p_n + priors.p_p - 1) > 1e-12:
        raise ConfigError("priors must be positive and sum to 1", "experiment_binary.priors")

    car = config.car
    if car.dt <= 0:
        raise ConfigError("must be positive", "car.dt")
    if car.destination <= 0:
        raise ConfigError("must be positive", "car.destination")
    if car.n_laws < 1:
        raise ConfigError("must be at least 1", "car.n_laws")
    if car.law_params.speeds_at_origin is not None and len(car.law_params.speeds_at_origin) != car.n_laws:
        raise ConfigError("needs exactly n_laws entries", "car.law_params.speeds_at_origin")
    if car.weight_method not in ("ratio_of_sums", "paper_literal_sum_of_ratios"):
        raise ConfigError(f"unknown weight method {car.weight_method!r}", "car.weight_method")
    return config


def config_to_dict(config: Any) -> Dict[str, Any]:
    return asdict(config)


def dump_config(config: AppConfig) -> str:
    """Render the resolved configuration as YAML."""
    return yaml.safe_dump(config_to_dict(config), sort_keys=False, default_flow_style=False)


def resolve_thread_count(config: AppConfig) -> int:
    """
    Number of worker threads: config/CLI value, else ETHICS_AUDIT_THREADS,
    else the machine's parallelism.
    """
    if config.threads is not None:
        return config.threads
    env_value = os.environ.get(THREADS_ENV_VAR)
    if env_value:
        try:
            threads = int(env_value)
        except ValueError:
            raise ConfigError(f"expected a positive integer, got {env_value!r}", THREADS_ENV_VAR)
        if threads < 1:
            raise ConfigError(f"expected a positive integer, got {env_value!r}", THREADS_ENV_VAR)
        return threads
    return os.cpu_count() or 1
