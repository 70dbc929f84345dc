"""
Assembly of AuditReport objects and every file the CLI writes.

Output files never contain wall-clock timestamps or host names, so two
runs with the same configuration produce byte-identical files.
"""

import logging
import math
import os
from dataclasses import asdict
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Sequence, Union

import numpy as np
import pandas as pd
import yaml

from app.config import (APP_VERSION, LOG_HEADER, REPORT_SUFFIX, RNG_ALGORITHM, ROC_HEADER,
                        TRAJECTORY_HEADER, AppConfig, config_to_dict)
from app.models import (AuditReport, BinaryAuditResult, DecisionLog, EthicsTrace, RocCurve,
                        Trajectory, WeightRatio)

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def _plain(value: Any) -> Any:
    """Convert numpy scalars, enums, tuples and NaN into YAML-safe Python values."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [_plain(v) for v in value]
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return None if math.isnan(value) else value
    return value


def run_metadata(command: str) -> Dict[str, Any]:
    """Provenance recorded in every report."""
    return {
        "command": command,
        "app_version": APP_VERSION,
        "rng_algorithm": RNG_ALGORITHM,
        "numpy_version": np.__version__,
    }


def _prepare(path: PathLike) -> str:
    path = str(path)
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    return path


def write_frame(frame: pd.DataFrame, path: PathLike) -> str:
    """Write a table as CSV with \\n line endings and full-precision floats."""
    path = _prepare(path)
    frame.to_csv(path, index=False, lineterminator="\n", encoding="utf-8")
    logger.info(f"Wrote {len(frame)} rows to {path}")
    return path


def write_decision_log(log: DecisionLog, path: PathLike) -> str:
    frame = pd.DataFrame({"score": log.scores, "action": log.actions.astype(int),
                          "truth": log.truths.astype(int)}, columns=LOG_HEADER)
    return write_frame(frame, path)


def write_roc_curve(roc: RocCurve, path: PathLike) -> str:
    frame = pd.DataFrame({"tau": roc.taus, "fpr": roc.fprs, "tpr": roc.tprs}, columns=ROC_HEADER)
    return write_frame(frame, path)


def write_trajectory(trajectory: Trajectory, path: PathLike) -> str:
    frame = pd.DataFrame({"t": trajectory.times, "x": trajectory.positions, "u": trajectory.speeds},
                         columns=TRAJECTORY_HEADER)
    return write_frame(frame, path)


def write_trace(trajectory: Trajectory, trace: EthicsTrace, path: PathLike) -> str:
    """Per-step file with header t,x,u,E1,...,ER."""
    if len(trace) != len(trajectory):
        raise ValueError(f"trace has {len(trace)} steps, trajectory has {len(trajectory)}")
    frame = pd.DataFrame({"t": trajectory.times, "x": trajectory.positions, "u": trajectory.speeds})
    for i in range(trace.n_risks):
        frame[f"E{i + 1}"] = trace.vectors[:, i]
    return write_frame(frame, path)


def report_to_dict(report: AuditReport) -> Dict[str, Any]:
    data = asdict(report)
    data["diagnostics"] = {name: value for name, value in report.diagnostics}
    return _plain(data)


def write_report(report: AuditReport, out_dir: PathLike, verb: str) -> str:
    """Write <out_dir>/<verb>_report.yaml."""
    path = _prepare(os.path.join(str(out_dir), f"{verb}{REPORT_SUFFIX}"))
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        yaml.safe_dump(report_to_dict(report), f, sort_keys=False, default_flow_style=False)
    logger.info(f"Wrote report to {path}")
    return path


def load_report(path: PathLike) -> Dict[str, Any]:
    with open(path, "r", encoding="utf-8") as f:
        return yaml.safe_load(f)


def build_binary_report(agent_id: str, result: BinaryAuditResult, config: AppConfig,
                        command: str = "audit-binary") -> AuditReport:
    """Report of one binary audit."""
    diagnostics = [("tau_star_estimate", result.tau_star_estimate)]
    diagnostics.extend(result.diagnostics.items())
    return AuditReport(
        agent_id=agent_id,
        method=result.method.value,
        recovered_ratio=result.ratio,
        ethics_vector=result.ethics.as_list(),
        weight_ratio=None,
        diagnostics=diagnostics,
        config_echo=config_to_dict(config),
        seed=config.seed,
        metadata=run_metadata(command),
    )


def _weight_ratio_entry(ratios: Sequence[WeightRatio], selected: str) -> Dict[str, Any]:
    entry = {ratio.method.value: ratio.value for ratio in ratios}
    entry["selected"] = selected
    return entry


def build_continuous_report(agent_id: str, aggregate: Sequence[float], ratios: Sequence[WeightRatio],
                            diagnostics: Dict[str, Any], config: AppConfig,
                            command: str) -> AuditReport:
    """Report of one continuous audit: the aggregate E vector and the weight ratios."""
    return AuditReport(
        agent_id=agent_id,
        method=config.car.weight_method,
        recovered_ratio=None,
        ethics_vector=[float(v) for v in aggregate],
        weight_ratio=_weight_ratio_entry(ratios, config.car.weight_method) if ratios else None,
        diagnostics=list(diagnostics.items()),
        config_echo=config_to_dict(config),
        seed=config.seed,
        metadata=run_metadata(command),
    )


def build_experiment_report(command: str, table: pd.DataFrame, summary: Dict[str, Any],
                            config: AppConfig, method: str, seed: int) -> AuditReport:
    """Report of a whole experiment; each table row becomes one entry of results."""
    return AuditReport(
        agent_id=command,
        method=method,
        recovered_ratio=None,
        ethics_vector=[],
        weight_ratio=None,
        diagnostics=list(summary.items()),
        config_echo=config_to_dict(config),
        seed=seed,
        metadata=run_metadata(command),
        results=table_records(table),
    )


def table_records(table: pd.DataFrame) -> List[Dict[str, Any]]:
    """Rows of a table as plain dictionaries; missing values become None."""
    return [_plain(row) for row in table.to_dict(orient="records")]

