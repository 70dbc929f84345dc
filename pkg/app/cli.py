"""
Command-line front end.

Exit codes: 0 success, 1 domain error, 2 usage, parse or configuration error.
"""

import argparse
import logging
import os
import re
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

import pandas as pd
import yaml
from rich.console import Console
from rich.logging import RichHandler
from rich.markup import escape
from rich.table import Table

from app.config import APP_DESCRIPTION, APP_TITLE, APP_VERSION, AppConfig, dump_config, load_config, \
    resolve_thread_count
from app.db.db_manager import get_db_manager
from app.errors import EthicsAuditError, InputError
from app.ethics.binary_ethics import audit_binary_agent
from app.ethics.continuous_ethics import simulate_trajectory
from app.models import AuditMethod, AuditReport, WeightMethod, WeightRatio
from app.parsers.decision_log_parser import parse_log_file, parse_trajectory_file
from app.reports.report_writer import (build_binary_report, build_continuous_report,
                                       build_experiment_report, write_decision_log, write_frame,
                                       write_report, write_roc_curve, write_trace, write_trajectory)
from app.roc.roc_curve import build_empirical_roc
from app.simulation.binary_experiment import generate_binary_agent_log, run_binary_experiment
from app.simulation.car_experiment import (analyse_trajectory, car_risk_models,
                                           default_control_laws, run_car_experiment)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_DOMAIN_ERROR = 1
EXIT_USAGE_ERROR = 2

console = Console()
error_console = Console(stderr=True)


def setup_logging(verbose: bool = False, quiet: bool = False) -> None:
    """Install the rich stderr handler; --verbose means DEBUG, --quiet means WARNING."""
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(
        level=level,
        format="%(message)s",
        handlers=[RichHandler(console=error_console, show_path=False, markup=False)],
        force=True,
    )


def _add_common_options(parser: argparse.ArgumentParser, suppress: bool) -> None:
    # sub-commands use SUPPRESS so a flag given before the verb is not reset by the verb's default
    default = (lambda value: argparse.SUPPRESS) if suppress else (lambda value: value)
    parser.add_argument("--config", default=default(None), help="YAML configuration file")
    parser.add_argument("--seed", type=int, default=default(None), help="Random seed for every generator")
    parser.add_argument("--method", choices=[m.value for m in AuditMethod], default=default(None),
                        help="Binary audit method")
    parser.add_argument("--out-dir", default=default(None), help="Directory for reports and data files")
    parser.add_argument("--threads", type=int, default=default(None),
                        help="Worker threads (default: ETHICS_AUDIT_THREADS or all cores)")
    parser.add_argument("--db", default=default(None), help="DuckDB file that records every report")
    parser.add_argument("--print-config", action="store_true", default=default(False),
                        help="Print the resolved configuration and exit")
    parser.add_argument("--verbose", action="store_true", default=default(False), help="Debug logging")
    parser.add_argument("--quiet", action="store_true", default=default(False), help="Warnings only")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ethics-audit", description=f"{APP_TITLE}: {APP_DESCRIPTION}")
    parser.add_argument("--version", action="version", version=f"%(prog)s {APP_VERSION}")
    _add_common_options(parser, suppress=False)
    verbs = parser.add_subparsers(dest="verb", metavar="VERB")

    audit = verbs.add_parser("audit-binary", help="Recover L_FP/L_FN from a decision log")
    audit.add_argument("log_path", help="CSV file with header score,action,truth")
    audit.add_argument("--agent-id", default=None, help="Name of the audited agent")
    audit.add_argument("--emit-roc", default=None, metavar="PATH", help="Write the empirical ROC curve")

    experiment = verbs.add_parser("experiment-binary", help="Audit synthetic agents with known ratios")
    experiment.add_argument("--emit-log", type=int, action="append", default=[], metavar="AGENT",
                            help="Write the decision log of agent AGENT (1-based); repeatable")

    car = verbs.add_parser("experiment-car", help="Ethics2Vec points of the control law family")
    car.add_argument("--emit-trace", action="append", default=[], metavar="LAW",
                     help="Write the per-step trace of a law, as 3 or law=3; repeatable")

    simulate = verbs.add_parser("simulate-car", help="Write trajectories of the control law family")
    simulate.add_argument("--law", type=int, action="append", default=[],
                          help="Only this law (1-based); repeatable")

    continuous = verbs.add_parser("audit-continuous", help="Weight ratio of an observed trajectory")
    continuous.add_argument("trajectory_path", help="CSV file with header t,x,u")
    continuous.add_argument("--agent-id", default=None, help="Name of the audited agent")

    verbs.add_parser("print-config", help="Print every configuration key with its value")

    history = verbs.add_parser("history", help="List audits stored with --db")
    history.add_argument("--limit", type=int, default=20, help="Number of runs to list")
    history.add_argument("--run-id", default=None, help="Print the full report of one run")

    for sub in verbs.choices.values():
        _add_common_options(sub, suppress=True)
    return parser


def resolve_config(args: argparse.Namespace) -> AppConfig:
    """Defaults, then the config file, then command-line flags."""
    overrides: Dict[str, Any] = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.method is not None:
        overrides["binary"] = {"method": args.method}
    if args.out_dir is not None:
        overrides["out_dir"] = args.out_dir
    if args.threads is not None:
        overrides["threads"] = args.threads
    return load_config(args.config, overrides)


def _print_table(title: str, frame: pd.DataFrame, columns: Optional[List[str]] = None) -> None:
    table = Table(title=title)
    columns = columns or list(frame.columns)
    for column in columns:
        table.add_column(column, justify="right")
    for _, row in frame[columns].iterrows():
        table.add_row(*[_format_cell(row[c]) for c in columns])
    console.print(table)


def _format_cell(value: Any) -> str:
    if value is None or (isinstance(value, float) and pd.isna(value)):
        return "-"
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def _law_id(text: str) -> int:
    match = re.fullmatch(r"(?:law=)?(\d+)", text.strip())
    if not match:
        raise InputError(f"--emit-trace expects a law number such as 3 or law=3, got {text!r}")
    return int(match.group(1))


def cmd_audit_binary(args: argparse.Namespace, config: AppConfig) -> AuditReport:
    """Audit one binary agent from its decision log."""
    log = parse_log_file(args.log_path)
    result = audit_binary_agent(log, config=config.binary)
    agent_id = args.agent_id or Path(args.log_path).stem

    if args.emit_roc:
        write_roc_curve(build_empirical_roc(log), args.emit_roc)

    console.print(f"[bold]{escape(agent_id)}[/bold]: L_FP/L_FN = {result.ratio:.6g} "
                  f"({result.method.value}), tau* = {result.tau_star_estimate:.6g}, "
                  f"Ethics2Vec = [{result.ethics.d_tpr_d_tau:.6g}, {result.ethics.d_fpr_d_tau:.6g}]")
    return build_binary_report(agent_id, result, config)


def cmd_experiment_binary(args: argparse.Namespace, config: AppConfig) -> AuditReport:
    """Run the synthetic binary experiment and write its data files."""
    if config.binary.method != AuditMethod.PARAMETRIC.value:
        logger.warning("experiment-binary always audits with the parametric method")
    experiment = config.experiment_binary
    result = run_binary_experiment(experiment, config.binary, resolve_thread_count(config))

    out_dir = config.out_dir
    table = result.table
    write_frame(table, os.path.join(out_dir, "experiment_binary_agents.csv"))
    write_frame(table[["true_ratio", "recovered_ratio"]], os.path.join(out_dir, "experiment_binary_ratios.csv"))
    write_frame(table[["agent", "true_ratio", "d_tpr_d_tau", "d_fpr_d_tau"]],
                os.path.join(out_dir, "experiment_binary_ethics2vec.csv"))
    for agent in args.emit_log:
        if not 1 <= agent <= len(experiment.ratios):
            raise InputError(f"--emit-log expects an agent between 1 and {len(experiment.ratios)}, got {agent}")
        log, _ = generate_binary_agent_log(experiment.ratios[agent - 1], experiment)
        write_decision_log(log, os.path.join(out_dir, f"agent_{agent}_log.csv"))

    _print_table("Recovered loss ratios", table, ["agent", "true_ratio", "recovered_ratio", "relative_error"])
    console.print(f"Pearson correlation(true, recovered) = {result.correlation}")

    summary = {
        "n_agents": len(table),
        "n_per_agent": experiment.n_per_agent,
        "correlation": result.correlation,
        "max_abs_relative_error": float(table["relative_error"].abs().max()),
    }
    return build_experiment_report("experiment-binary", table, summary, config,
                                   AuditMethod.PARAMETRIC.value, experiment.seed)


def cmd_experiment_car(args: argparse.Namespace, config: AppConfig) -> AuditReport:
    """Run the control law sweep and write its data files."""
    law_ids = [_law_id(text) for text in args.emit_trace]
    result = run_car_experiment(config.car, resolve_thread_count(config))

    out_dir = config.out_dir
    table = result.table
    write_frame(table, os.path.join(out_dir, "experiment_car_laws.csv"))
    write_frame(table[["law", "E1", "E2"]], os.path.join(out_dir, "experiment_car_ethics2vec.csv"))
    runs = {run.law.id: run for run in result.runs}
    for law_id in law_ids:
        if law_id not in runs:
            raise InputError(f"--emit-trace expects a law between 1 and {len(runs)}, got {law_id}")
        write_trace(runs[law_id].trajectory, runs[law_id].trace,
                    os.path.join(out_dir, f"trace_law_{law_id}.csv"))

    _print_table("Ethics2Vec of the control laws", table,
                 ["law", "arrival_time", "E1", "E2", "ratio_of_sums", "paper_literal_sum_of_ratios"])

    summary = {
        "n_laws": len(table),
        "n_arrived": int(table["arrival_time"].notna().sum()),
        "weight_method": config.car.weight_method,
        "max_relative_residual": float((table["stationarity_residual"] / table["derivative_mass"]).max()),
    }
    return build_experiment_report("experiment-car", table, summary, config,
                                   config.car.weight_method, config.car.seed)


def cmd_simulate_car(args: argparse.Namespace, config: AppConfig) -> AuditReport:
    """Simulate the control laws and write one trajectory file per law."""
    car = config.car
    laws = default_control_laws(car.law_params, car.destination, car.n_laws, car.u_max)
    if args.law:
        unknown = sorted(set(args.law) - {law.id for law in laws})
        if unknown:
            raise InputError(f"--law expects laws between 1 and {len(laws)}, got {unknown}")
        laws = [law for law in laws if law.id in args.law]

    rows = []
    for law in laws:
        trajectory = simulate_trajectory(law, car.horizon_T, car.dt, car.destination)
        write_trajectory(trajectory, os.path.join(config.out_dir, f"trajectory_law_{law.id}.csv"))
        rows.append({"law": law.id, "steps": len(trajectory), "arrival_time": trajectory.arrival_time,
                     "final_position": trajectory.final_position})

    table = pd.DataFrame(rows, columns=["law", "steps", "arrival_time", "final_position"])
    _print_table("Simulated trajectories", table)
    return build_experiment_report("simulate-car", table, {"n_laws": len(table)}, config,
                                   "euler", car.seed)


def cmd_audit_continuous(args: argparse.Namespace, config: AppConfig) -> AuditReport:
    """Audit an observed trajectory under the configured risk models."""
    car = config.car
    trajectory = parse_trajectory_file(args.trajectory_path, car.destination)
    risks = car_risk_models(car)
    trace, _, summary = analyse_trajectory(trajectory, risks, car)

    ratios = [WeightRatio(summary["ratio_of_sums"], WeightMethod.RATIO_OF_SUMS)]
    if summary["paper_literal_sum_of_ratios"] is not None:
        ratios.append(WeightRatio(summary["paper_literal_sum_of_ratios"],
                                  WeightMethod.PAPER_LITERAL_SUM_OF_RATIOS))
    elif car.weight_method == WeightMethod.PAPER_LITERAL_SUM_OF_RATIOS.value:
        logger.warning("The selected literal weight ratio is undefined for this trajectory")
    write_trace(trajectory, trace, os.path.join(config.out_dir, "audit_continuous_trace.csv"))

    agent_id = args.agent_id or Path(args.trajectory_path).stem
    console.print(f"[bold]{escape(agent_id)}[/bold]: E = [{summary['E1']:.6g}, {summary['E2']:.6g}], "
                  f"w1/w2 = {summary['ratio_of_sums']:.6g} (ratio of sums)")
    return build_continuous_report(agent_id, [summary["E1"], summary["E2"]], ratios, summary,
                                   config, "audit-continuous")


def cmd_history(args: argparse.Namespace) -> int:
    """List stored runs, or print one stored report."""
    db = get_db_manager(args.db)
    try:
        if args.run_id:
            details = db.get_run_details(args.run_id)
            if details is None:
                error_console.print(f"No stored run with id {args.run_id}")
                return EXIT_DOMAIN_ERROR
            print(yaml.safe_dump(details, sort_keys=False), end="")
            return EXIT_OK

        runs = db.get_all_runs(args.limit)
        if not runs:
            console.print("No stored runs.")
            return EXIT_OK
        frame = pd.DataFrame(runs).drop(columns=["created_at"])
        _print_table(f"Stored runs ({db.db_path})", frame)
        return EXIT_OK
    finally:
        db.close()


COMMANDS = {
    "audit-binary": cmd_audit_binary,
    "experiment-binary": cmd_experiment_binary,
    "experiment-car": cmd_experiment_car,
    "simulate-car": cmd_simulate_car,
    "audit-continuous": cmd_audit_continuous,
}


def run(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    if args.print_config or args.verb == "print-config":
        print(dump_config(config), end="")
        return EXIT_OK
    if args.verb == "history":
        return cmd_history(args)

    report = COMMANDS[args.verb](args, config)
    path = write_report(report, config.out_dir, args.verb.replace("-", "_"))
    console.print(f"Report written to {path}")
    if args.db:
        db = get_db_manager(args.db)
        try:
            db.store_report(report)
        finally:
            db.close()
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.verbose, args.quiet)

    if args.verb is None and not args.print_config:
        parser.print_help(sys.stderr)
        return EXIT_USAGE_ERROR

    try:
        return run(args)
    except InputError as e:
        error_console.print(f"[red]error:[/red] {escape(str(e))}\n[yellow]hint:[/yellow] {escape(e.hint)}", markup=True,
                            highlight=False)
        return EXIT_USAGE_ERROR
    except EthicsAuditError as e:
        error_console.print(f"[red]{type(e).__name__}:[/red] {escape(str(e))}\n[yellow]hint:[/yellow] {escape(e.hint)}",
                            markup=True, highlight=False)
        return EXIT_DOMAIN_ERROR
    except ValueError as e:
        logger.error(f"Invalid value: {e}")
        return EXIT_DOMAIN_ERROR
    except OSError as e:
        logger.error(f"File system error: {e}")
        return EXIT_DOMAIN_ERROR
