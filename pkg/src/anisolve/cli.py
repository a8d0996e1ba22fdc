"""
Command-line front end

Subcommands:
    run          validate and solve one case, write CSV fields and summary.json
    convergence  refinement study of one case, write convergence.csv
    verify       randomized invariant suite

Exit codes: 0 success, 1 configuration/I/O/expression error, 2 validation
failure, 3 solver failure (partial artifacts are still written).
"""

import argparse
import logging
import sys
import time
from pathlib import Path
from typing import Optional

from .case_loader import Case, build_case
from .config import DEFAULT_LEVELS, DEFAULT_SEED, load_case_config
from .constants import (
    CONVERGENCE_CSV,
    EMOJI_CHECK,
    EMOJI_CROSS,
    EMOJI_ROCKET,
    EMOJI_WARNING,
    EXIT_ERROR,
    EXIT_OK,
    EXIT_SOLVER,
    EXIT_VALIDATION,
    LEDGER_JSON,
    MODE_ELLIPTIC,
    SEPARATOR_LINE,
    SOLUTION_CSV,
    SUMMARY_JSON,
)
from .convergence import run_convergence
from .elliptic import solve_elliptic, validate
from .exceptions import (
    AnisolveError,
    ConfigurationError,
    ExpressionError,
    SolverError,
    TrajectoryAbortedError,
    ValidationError,
)
from .grid import GridFunction
from .output import (
    ensure_directory,
    snapshot_filename,
    write_convergence_csv,
    write_field_csv,
    write_json,
)
from .parabolic import Trajectory, solve_parabolic, validate_parabolic
from .types import RunSummary, ValidationReport
from .utils import configure_logging, config_hash, format_scientific
from .verify import run_verify

logger = logging.getLogger(__name__)


# ==============================================================================
# RUN
# ==============================================================================


def _print_validation(report: ValidationReport) -> None:
    for check in report["checks"]:
        marker = EMOJI_CHECK if check["passed"] else EMOJI_CROSS
        print(f"{marker} {check['condition']}: {check['message']}")


def _write_trajectory(trajectory: Trajectory, case: Case, out: Path) -> list[str]:
    files = [write_field_csv(trajectory.final, out / SOLUTION_CSV).name]
    for t in case.config["output"]["snapshots"]:
        try:
            state = trajectory.at(t)
        except ValueError as e:
            logger.warning("Skipping snapshot: %s", e)
            continue
        files.append(write_field_csv(state, out / snapshot_filename(t)).name)
    return files


def run_case(config_path: str, out_dir: Optional[str] = None, seed: Optional[int] = None) -> tuple[RunSummary, int]:
    """
    Validate and solve one case

    Args:
        config_path: JSON case file
        out_dir: Output directory (default: the case's output.directory)
        seed: Seed override recorded in the summary

    Returns:
        Tuple of (summary, exit code)

    Raises:
        ConfigurationError: On unreadable or invalid configs
    """
    started = time.perf_counter()
    config = load_case_config(config_path)
    if seed is not None:
        config["seed"] = seed
    case = build_case(config)
    out = ensure_directory(out_dir or config["output"]["directory"])

    print(f"{EMOJI_ROCKET} Running {case.mode} case '{case.name}' (d={config['grid']['d']}, n={config['grid']['n']})")
    print(SEPARATOR_LINE)

    validation = validate(case.problem) if case.mode == MODE_ELLIPTIC else validate_parabolic(case.problem)
    _print_validation(validation)

    summary = RunSummary(
        case=case.name,
        mode=case.mode,
        status="ok",
        config_hash=config_hash(config),
        config=config,
        validation=validation,
        report=None,
        error=None,
        files=[],
        wall_time=0.0,
    )
    code = EXIT_OK

    if not validation["passed"]:
        summary["status"] = "validation_failed"
        summary["error"] = next(c["message"] for c in validation["checks"] if not c["passed"])
        code = EXIT_VALIDATION
    else:
        try:
            if case.mode == MODE_ELLIPTIC:
                u, report = solve_elliptic(case.problem, case.continuation, case.newton)
                summary["files"].append(write_field_csv(u, out / SOLUTION_CSV).name)
                print(f"{EMOJI_CHECK} Solved: sup|u| = {report['sup_norm']:.6g}, final defect {format_scientific(report['final_defect'])}")
            else:
                trajectory, report = solve_parabolic(case.problem, case.parabolic)
                summary["files"].extend(_write_trajectory(trajectory, case, out))
                summary["files"].append(write_json(report["steps"], out / LEDGER_JSON).name)
                print(f"{EMOJI_CHECK} Solved {len(report['steps'])} time step(s), energy ledger {'ok' if report['energy_ok'] else 'VIOLATED'}")
            summary["report"] = report
        except SolverError as e:
            summary["status"] = "solver_failed"
            summary["error"] = e.message
            summary["report"] = e.report
            code = EXIT_SOLVER
            if isinstance(e, TrajectoryAbortedError):
                summary["files"].extend(_write_trajectory(e.trajectory, case, out))
            elif isinstance(e.best, GridFunction):
                summary["files"].append(write_field_csv(e.best, out / SOLUTION_CSV).name)
            print(f"{EMOJI_WARNING} {e.message}; partial results written")
        except ValidationError as e:
            summary["status"] = "validation_failed"
            summary["error"] = e.message
            code = EXIT_VALIDATION

    summary["wall_time"] = time.perf_counter() - started
    summary["files"].append(SUMMARY_JSON)
    write_json(summary, out / SUMMARY_JSON)
    print(f"💾 Saved results to {out}")
    return summary, code


# ==============================================================================
# ARGUMENTS
# ==============================================================================


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="anisolve",
        description="Solve anisotropic p(u)-Laplacian problems on tensor grids",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Validate and solve one case")
    run.add_argument("--config", required=True, help="JSON case file")
    run.add_argument("--out", default=None, help="Output directory (default: from the case)")
    run.add_argument("--seed", type=int, default=None, help="Seed recorded with the run")

    study = sub.add_parser("convergence", help="Grid refinement study of one case")
    study.add_argument("--config", required=True, help="JSON case file")
    study.add_argument("--out", default=None, help="Output directory (default: from the case)")
    study.add_argument(
        "--levels",
        type=int,
        nargs="+",
        default=DEFAULT_LEVELS,
        help=f"Cells per axis (default: {' '.join(map(str, DEFAULT_LEVELS))})",
    )
    study.add_argument("--jobs", type=int, default=1, help="Worker processes (default: 1)")

    check = sub.add_parser("verify", help="Randomized invariant suite")
    check.add_argument("--seed", type=int, default=DEFAULT_SEED, help=f"Root seed (default: {DEFAULT_SEED})")
    check.add_argument("--trials", type=int, default=None, help="Override every trial count")
    return parser


def _convergence(args: argparse.Namespace) -> int:
    config = load_case_config(args.config)
    rows = run_convergence(config, args.levels, jobs=max(1, args.jobs))
    out = ensure_directory(args.out or config["output"]["directory"])

    print(SEPARATOR_LINE)
    print(f"{'n':>6}  {'error':>12}  {'order':>8}")
    for row in rows:
        order = "-" if row["order"] is None else f"{row['order']:.3f}"
        print(f"{row['n']:>6}  {row['error']:>12.4e}  {order:>8}")
    write_convergence_csv(rows, out / CONVERGENCE_CSV)
    return EXIT_OK


def _verify(args: argparse.Namespace) -> int:
    if args.trials is not None and args.trials < 1:
        raise ConfigurationError("--trials", "must be at least 1")
    report = run_verify(seed=args.seed, trials=args.trials)
    print(SEPARATOR_LINE)
    if report["passed"]:
        print(f"{EMOJI_CHECK} All {len(report['properties'])} properties passed")
        return EXIT_OK
    failed = [p["name"] for p in report["properties"] if not p["passed"]]
    print(f"{EMOJI_CROSS} Failed: {', '.join(failed)}")
    return EXIT_VALIDATION


def main(argv: Optional[list[str]] = None) -> int:
    """Entry point; returns the process exit code"""
    args = build_parser().parse_args(argv)

    try:
        configure_logging()
        if args.command == "run":
            _, code = run_case(args.config, args.out, args.seed)
            return code
        if args.command == "convergence":
            return _convergence(args)
        return _verify(args)
    except (ConfigurationError, ExpressionError) as e:
        print(f"{EMOJI_CROSS} {e.message}", file=sys.stderr)
        return EXIT_ERROR
    except ValidationError as e:
        print(f"{EMOJI_CROSS} {e.message}", file=sys.stderr)
        return EXIT_VALIDATION
    except SolverError as e:
        print(f"{EMOJI_CROSS} {e.message}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as e:
        print(f"{EMOJI_CROSS} I/O error: {e}", file=sys.stderr)
        return EXIT_ERROR
    except AnisolveError as e:
        print(f"{EMOJI_CROSS} {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
