import argparse
import logging
import math
import numpy as np
import yaml
from rich.console import Console
from rich.logging import RichHandler
from rich.table import Table
from sqlalchemy.exc import SQLAlchemyError
from typing import Any, Dict, List, Optional, Sequence
from .config_loader import (
    KNOWN_SCHEMES,
    ExperimentKind,
    load_experiment_config,
    log_level_from_env,
)
from .conic import SolverSettings
from .experiments import ExperimentRun, run_experiment, run_scheme
from .outputs import emit_outputs
from .store import ResultStore
from .verification import verify

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
FAILURE_RATE_LIMIT = 0.10

console = Console()


def _setup_logging(level: Optional[str]) -> None:
    logging.basicConfig(
        level=(level or log_level_from_env()).upper(),
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=console, show_path=False)],
        force=True,
    )


def _schemes(raw: Optional[str]) -> Optional[List[str]]:
    if not raw:
        return None
    return [s.strip() for s in raw.split(",") if s.strip()]


def _sweep(raw: Optional[str]) -> Optional[List[float]]:
    if not raw:
        return None
    return [float(v) for v in raw.split(",") if v.strip()]


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    return {
        "experiment": args.experiment,
        "trials": args.trials,
        "seed": args.seed,
        "schemes": _schemes(args.schemes),
        "sweep": _sweep(args.sweep),
        "workers": getattr(args, "workers", None),
    }


def _summary_table(run: ExperimentRun) -> Table:
    table = Table(title=f"{run.config.experiment.value} summary")
    for name in (
        "sweep",
        "scheme",
        "rate (bits)",
        "p2/P",
        "Eve (dB)",
        "Bob (dB)",
        "ok",
        "outage",
        "failed",
    ):
        table.add_column(name)

    def fmt(v: float) -> str:
        return "-" if math.isnan(v) else f"{v:.4f}"

    for row in run.summary:
        table.add_row(
            f"{row.sweep_value:g}",
            row.scheme,
            fmt(row.mean_rate_bits),
            fmt(row.mean_jamming_fraction),
            fmt(row.mean_eve_db),
            fmt(row.mean_bob_db),
            str(row.n_ok),
            str(row.n_outage),
            str(row.n_failed),
        )
    return table


def cmd_run(args: argparse.Namespace) -> int:
    try:
        cfg = load_experiment_config(args.config, _overrides(args))
    except (ValueError, OSError, yaml.YAMLError) as exc:
        logger.error("Invalid configuration: %s", exc)
        return EXIT_CONFIG
    run = run_experiment(cfg)
    try:
        emit_outputs(run, args.out_dir)
    except ValueError as exc:
        logger.error("%s", exc)
        return EXIT_CONFIG
    if args.db:
        try:
            written = ResultStore(args.db).write(run.records)
        except SQLAlchemyError as exc:
            logger.error("Cannot store records in %s: %s", args.db, exc)
            return EXIT_CONFIG
        logger.info("Stored %d records in %s", written, args.db)
    console.print(_summary_table(run))
    if run.failure_rate > FAILURE_RATE_LIMIT:
        logger.error(
            "Solver failure rate %.1f%% exceeds %.0f%%",
            100 * run.failure_rate,
            100 * FAILURE_RATE_LIMIT,
        )
        return EXIT_SOLVER
    return EXIT_OK


def _matrix(name: str, m: np.ndarray) -> Table:
    table = Table(title=name, show_header=False)
    for row in np.asarray(m):
        table.add_row(*(f"{v.real:+.4f}{v.imag:+.4f}j" for v in row))
    return table


def cmd_single(args: argparse.Namespace) -> int:
    try:
        cfg = load_experiment_config(args.config, _overrides(args))
        if not 0 <= args.sweep_index < len(cfg.sweep):
            raise ValueError(
                f"Sweep index {args.sweep_index} outside "
                f"[0, {len(cfg.sweep) - 1}]"
            )
    except (ValueError, OSError, yaml.YAMLError) as exc:
        logger.error("Invalid configuration: %s", exc)
        return EXIT_CONFIG
    result = run_scheme(cfg, args.scheme, args.sweep_index, args.trial)
    console.print(_matrix("Q_x", result.q_x))
    console.print(_matrix("Q_z", result.q_z))
    info = Table(title=f"{result.scheme} (trial {args.trial})")
    info.add_column("quantity")
    info.add_column("value")
    mm = result.worst_mismatch
    eigenvalues = ", ".join(f"{v:.4g}" for v in result.qx_eigenvalues)
    for key, value in (
        ("status", result.status.value),
        ("worst-case secrecy rate (bits)", f"{result.secrecy_rate_bits:.6f}"),
        ("p1, p2", f"{result.p1:.6g}, {result.p2:.6g}"),
        ("Eve SINR", f"{result.eve_metric:.6g}"),
        ("Bob SINR", f"{result.bob_metric:.6g}"),
        ("||e_h||, ||e_g||", f"{np.linalg.norm(mm.e_h):.6g}, "
         f"{np.linalg.norm(mm.e_g):.6g}"),
        ("design value", f"{result.design_value:.6g}"),
        ("iterations", str(result.iterations)),
        ("Q_x eigenvalues", eigenvalues),
        ("message", result.message),
    ):
        info.add_row(key, value)
    console.print(info)
    return EXIT_OK if result.ok else EXIT_SOLVER


def cmd_verify(args: argparse.Namespace) -> int:
    results = verify(
        full=args.full, seed=args.seed, settings=SolverSettings()
    )
    table = Table(title="Oracle checks")
    for name in ("check", "instances", "worst", "tolerance", "result"):
        table.add_column(name)
    for r in results:
        table.add_row(
            r.name,
            str(r.instances),
            f"{r.worst:.3g}",
            f"{r.tolerance:.3g}",
            "pass" if r.passed else f"FAIL {r.detail}".strip(),
        )
    console.print(table)
    return EXIT_OK if all(r.passed for r in results) else EXIT_SOLVER


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="robustwiretap",
        description="Robust secrecy designs for MISO wiretap channels.",
    )
    parser.add_argument("--log-level", default=None)
    sub = parser.add_subparsers(dest="command", required=True)

    def experiment_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", default=None, help="YAML config file")
        p.add_argument(
            "--experiment",
            choices=[k.value for k in ExperimentKind],
            default=None,
        )
        p.add_argument("--trials", type=int, default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument(
            "--schemes",
            default=None,
            help=f"Comma-separated subset of {', '.join(KNOWN_SCHEMES)}",
        )
        p.add_argument(
            "--sweep", default=None, help="Comma-separated sweep values"
        )

    run = sub.add_parser("run", help="Run a Monte Carlo experiment")
    experiment_flags(run)
    run.add_argument("--out-dir", default="results")
    run.add_argument("--workers", type=int, default=None)
    run.add_argument("--db", default=None, help="SQLite file for records")
    run.set_defaults(func=cmd_run)

    single = sub.add_parser("single", help="One scheme on one channel")
    experiment_flags(single)
    single.add_argument("--scheme", required=True, choices=KNOWN_SCHEMES)
    single.add_argument("--trial", type=int, default=0)
    single.add_argument("--sweep-index", type=int, default=0)
    single.set_defaults(func=cmd_single)

    check = sub.add_parser("verify", help="Run the oracle suites")
    check.add_argument("--full", action="store_true")
    check.add_argument("--seed", type=int, default=0)
    check.set_defaults(func=cmd_verify)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _setup_logging(args.log_level)
    return int(args.func(args))
