#!/usr/bin/env python3
"""Command-line interface for ztselect."""

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from dataclasses import asdict, dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

from . import checks, ergopt, gibbs
from .closedform import MAX_BETA, eigen_triple
from .errors import InvalidParamsError, ZtselectError
from .ringspace import Params, Ring
from .utils import Colors, colorize, format_float, format_table

logger = logging.getLogger(__name__)

ENV_THREADS = "ZTSELECT_THREADS"
DEFAULT_TOL = 1e-10
MAX_TOL = 1e-4

CSV_COLUMNS = (
    "alpha",
    "gamma_slope",
    "beta",
    "depth",
    "P",
    "log_P_over_beta",
    "P_e2beta",
    "x_ratio",
    "nu_cyl_ratio",
    "nu_star_ratio",
    "mu0",
    "mu1",
    "mu2",
    "mu_ratio",
    "target_mu_ratio",
    "target_gamma",
    "residual_H",
    "residual_nu",
    "certified",
)

SUBACTION_COLUMNS = (
    "alpha",
    "gamma_slope",
    "delta_v",
    "gamma",
    "certified",
    "calibration_violation",
    "beta",
    "sup_distance",
    "delta_v_estimate",
    "gamma_estimate",
)

EIG_RING_DEPTH = 3
GRID_HELP = "Comma-separated, strictly increasing"

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERICAL = 2


class _ArgumentParser(argparse.ArgumentParser):
    """argparse with usage errors mapped to exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"Error: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


def _strictly_increasing(values: Sequence[float]) -> bool:
    return all(b > a for a, b in zip(values, values[1:]))


@dataclass(frozen=True)
class RunConfig:
    command: str
    alpha_grid: Tuple[float, ...]
    beta_grid: Tuple[float, ...]
    gamma_slope: float = 3.0
    depth: Optional[int] = None
    tol: float = DEFAULT_TOL
    output_format: str = "csv"
    output_path: Optional[str] = None
    threads: Optional[int] = None
    inject_perturbation: bool = False
    only_checks: Tuple[str, ...] = ()

    def __post_init__(self):
        for name in ("alpha_grid", "beta_grid"):
            grid = getattr(self, name)
            if not grid:
                raise InvalidParamsError(f"{name} must not be empty")
            if not _strictly_increasing(grid):
                raise InvalidParamsError(
                    f"{name} must be strictly increasing, got {list(grid)}"
                )
        if any(not a > 0 for a in self.alpha_grid):
            raise InvalidParamsError("alpha values must be > 0")
        if any(not 0 <= b <= MAX_BETA for b in self.beta_grid):
            raise InvalidParamsError(f"beta values must lie in [0, {MAX_BETA:g}]")
        if not self.gamma_slope > 1:
            raise InvalidParamsError(f"gamma slope must be > 1, got {self.gamma_slope}")
        if not 0 < self.tol <= MAX_TOL:
            raise InvalidParamsError(
                f"tol must lie in (0, {MAX_TOL:g}], got {self.tol:g}"
            )
        if self.depth is not None and self.depth < 3:
            raise InvalidParamsError(f"depth must be >= 3, got {self.depth}")
        if self.threads is not None and self.threads < 1:
            raise InvalidParamsError(f"thread cap must be >= 1, got {self.threads}")
        if self.output_format not in ("csv", "json"):
            raise InvalidParamsError(f"unknown output format {self.output_format!r}")
        unknown = set(self.only_checks) - {name for name, _ in checks.CHECKS}
        if unknown:
            raise InvalidParamsError(f"unknown check(s): {', '.join(sorted(unknown))}")

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["alpha_grid"] = list(self.alpha_grid)
        data["beta_grid"] = list(self.beta_grid)
        data.pop("inject_perturbation")
        data["only_checks"] = list(self.only_checks)
        return data


def _parse_grid(text: str) -> Tuple[float, ...]:
    try:
        return tuple(float(part) for part in text.split(",") if part.strip())
    except ValueError:
        raise InvalidParamsError(
            f"grid must be comma-separated numbers, got {text!r}"
        ) from None


def _thread_cap(flag: Optional[int]) -> Optional[int]:
    if flag is not None:
        return flag
    env = os.getenv(ENV_THREADS)
    if env is None or not env.strip():
        return os.cpu_count()
    try:
        return int(env)
    except ValueError:
        raise InvalidParamsError(
            f"{ENV_THREADS} must be an integer, got {env!r}"
        ) from None


def _json_value(value: Any) -> Any:
    if isinstance(value, float) and not math.isfinite(value):
        return format_float(value)
    if isinstance(value, dict):
        return {k: _json_value(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_value(v) for v in value]
    return value


def _emit(text: str, config: RunConfig) -> None:
    """Write output to the configured path, or stdout."""
    if config.output_path:
        with open(config.output_path, "w", newline="") as f:
            f.write(text)
        print(f"Output saved to: {config.output_path}", file=sys.stderr)
    else:
        sys.stdout.write(text)


def _cell(value: Any) -> str:
    return value if isinstance(value, str) else format_float(value)


def _csv_text(columns: Sequence[str], rows: List[Dict[str, Any]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(row[c]) for c in columns])
    return buffer.getvalue()


def _json_text(
    config: RunConfig, rows: List[Dict[str, Any]], results: List[Dict[str, Any]]
) -> str:
    data = {"config": config.to_dict(), "rows": rows, "checks": results}
    return json.dumps(_json_value(data), indent=2) + "\n"


# ----------------------------
# Commands
# ----------------------------


def _selected_rings() -> List[Ring]:
    rings = [Ring.fix0(), Ring.fix1(), Ring.two_head()]
    rings += [Ring.run(s, n) for s in (0, 1) for n in range(1, EIG_RING_DEPTH + 1)]
    return rings


def cmd_eig(config: RunConfig) -> int:
    p = Params(config.alpha_grid[0], config.gamma_slope, config.beta_grid[0])
    triple = eigen_triple(p, config.depth, config.tol)
    record = gibbs.selection_record(p, config.depth, config.tol, triple=triple)
    row = record.to_dict()
    for r in _selected_rings():
        row[f"H[{r.label}]"] = triple.H[r].to_float()
    for r in _selected_rings():
        row[f"nu[{r.label}]"] = triple.nu[r].to_float()

    if config.output_format == "json":
        _emit(_json_text(config, [row], []), config)
    else:
        fields = [{"field": k, "value": v} for k, v in row.items()]
        _emit(_csv_text(("field", "value"), fields), config)
    return EXIT_OK


def cmd_sweep(config: RunConfig) -> int:
    records = gibbs.selection_report(
        config.alpha_grid,
        config.beta_grid,
        gamma_slope=config.gamma_slope,
        depth=config.depth,
        tol=config.tol,
        threads=config.threads,
    )
    rows = [r.to_dict() for r in records]
    targets = [
        {"name": f"target alpha={r.alpha:g} beta={r.beta:g}", "passed": r.target_met}
        for r in records
        if r.target_met is not None
    ]
    for t in targets:
        if not t["passed"]:
            logger.warning("%s not met", t["name"])

    if config.output_format == "json":
        _emit(_json_text(config, rows, targets), config)
    else:
        _emit(_csv_text(CSV_COLUMNS, rows), config)
    return EXIT_OK


def cmd_verify(config: RunConfig, use_color: bool = False) -> int:
    opts = checks.CheckOptions(
        alphas=config.alpha_grid,
        gamma_slope=config.gamma_slope,
        perturb=config.inject_perturbation,
    )
    results = checks.run_checks(opts, config.only_checks)
    passed = all(r.passed for r in results)

    if config.output_format == "json":
        _emit(_json_text(config, [], [asdict(r) for r in results]), config)
    else:
        rows = [
            [
                r.name,
                colorize("pass", Colors.GREEN, use_color)
                if r.passed
                else colorize("FAIL", Colors.RED, use_color),
                r.detail,
            ]
            for r in results
        ]
        lines = format_table(["check", "status", "detail"], rows)
        summary = f"{sum(r.passed for r in results)}/{len(results)} checks passed"
        lines.append(colorize(summary, Colors.BOLD, use_color))
        _emit("\n".join(lines) + "\n", config)
    return EXIT_OK if passed else EXIT_NUMERICAL


def cmd_subaction(config: RunConfig) -> int:
    betas = tuple(b for b in config.beta_grid if b > 0)
    if not betas:
        raise InvalidParamsError("subaction comparison needs at least one beta > 0")
    rows: List[Dict[str, Any]] = []
    for alpha in config.alpha_grid:
        p = Params(alpha, config.gamma_slope, betas[0])
        solution = ergopt.solve_V(alpha, config.gamma_slope)
        s = ergopt.subaction_from_solution(solution, config.gamma_slope)
        violation = ergopt.verify_calibration(s, p)
        comparison = ergopt.compare_V_to_H(p, betas)
        for r in comparison.rows:
            rows.append(
                {
                    "alpha": alpha,
                    "gamma_slope": config.gamma_slope,
                    "delta_v": solution.delta_v,
                    "gamma": solution.gamma,
                    "certified": solution.certified,
                    "calibration_violation": violation,
                    **r._asdict(),
                }
            )

    if config.output_format == "json":
        _emit(_json_text(config, rows, []), config)
    else:
        _emit(_csv_text(SUBACTION_COLUMNS, rows), config)
    return EXIT_OK


COMMANDS = {
    "eig": cmd_eig,
    "sweep": cmd_sweep,
    "subaction": cmd_subaction,
}

DEFAULT_ALPHA_GRID = {
    "eig": "2",
    "sweep": "0.5,1,2",
    "verify": "0.5,1,2",
    "subaction": "0.5,1,2",
}
DEFAULT_BETA_GRID = {
    "eig": "20",
    "sweep": "10,20,40",
    "verify": "0",
    "subaction": "20,40,80",
}


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(
        description="Zero-temperature selection for the two-slope potential "
        "on the full 3-shift",
        prog="ztselect",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""Examples:
  ztselect eig --alpha 1 --beta 0               # Pressure ln 3 at infinite temperature
  ztselect eig --alpha 2 --beta 40 --format json
  ztselect sweep --alpha-grid 0.5,1,2 --beta-grid 10,20,40 -o sweep.csv
  ztselect verify                               # Named check table, exit 2 on failure
  ztselect subaction --alpha-grid 0.5,2 --gamma-slope 2.5
        """,
    )
    parser.add_argument(
        "-v",
        "--verbose",
        action="count",
        default=0,
        help="INFO with -v, DEBUG with -vv",
    )
    sub = parser.add_subparsers(
        dest="command", required=True, parser_class=_ArgumentParser
    )

    helps = {
        "eig": "Eigen data and selection quantities at one (alpha, beta)",
        "sweep": "Selection records over an (alpha, beta) grid",
        "verify": "Run the named verification checks",
        "subaction": "Calibrated subaction and its distance to (1/beta) log H",
    }
    for name, help_text in helps.items():
        cmd = sub.add_parser(name, help=help_text)
        if name == "eig":
            cmd.add_argument(
                "--alpha", type=float, help="Level of the potential on [2]"
            )
            cmd.add_argument("--beta", type=float, help="Inverse temperature")
        else:
            cmd.add_argument("--alpha-grid", help=GRID_HELP)
            if name != "verify":
                cmd.add_argument("--beta-grid", help=GRID_HELP)
        cmd.add_argument(
            "--gamma-slope", type=float, default=3.0, help="Slope at 1^inf (> 1)"
        )
        cmd.add_argument(
            "--depth", type=int, help="Ring truncation depth (default: automatic)"
        )
        cmd.add_argument(
            "--tol", type=float, default=DEFAULT_TOL, help="Pressure tolerance"
        )
        cmd.add_argument(
            "-f",
            "--format",
            choices=["csv", "json"],
            default="csv",
            dest="output_format",
        )
        cmd.add_argument("-o", "--output", help="Write output to this path")
        cmd.add_argument(
            "--threads", type=int, help=f"Thread cap (overrides {ENV_THREADS})"
        )
        cmd.add_argument(
            "-c", "--color", action="store_true", default=True, help=argparse.SUPPRESS
        )
        cmd.add_argument(
            "--no-color", action="store_false", dest="color", help="Disable colors"
        )
        if name == "verify":
            cmd.add_argument(
                "--inject-perturbation", action="store_true", help=argparse.SUPPRESS
            )
            cmd.add_argument(
                "--check",
                action="append",
                default=[],
                dest="only_checks",
                help="Run only this check (repeatable)",
            )
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    if args.command == "eig":
        alpha = args.alpha if args.alpha is not None else DEFAULT_ALPHA_GRID["eig"]
        beta = args.beta if args.beta is not None else DEFAULT_BETA_GRID["eig"]
        alpha_grid, beta_grid = (float(alpha),), (float(beta),)
    else:
        alpha_grid = _parse_grid(args.alpha_grid or DEFAULT_ALPHA_GRID[args.command])
        beta_grid = _parse_grid(
            getattr(args, "beta_grid", None) or DEFAULT_BETA_GRID[args.command]
        )
    return RunConfig(
        command=args.command,
        alpha_grid=alpha_grid,
        beta_grid=beta_grid,
        gamma_slope=args.gamma_slope,
        depth=args.depth,
        tol=args.tol,
        output_format=args.output_format,
        output_path=args.output,
        threads=_thread_cap(args.threads),
        inject_perturbation=getattr(args, "inject_perturbation", False),
        only_checks=tuple(getattr(args, "only_checks", ())),
    )


def _configure_logging(verbosity: int) -> None:
    level = logging.WARNING
    if verbosity == 1:
        level = logging.INFO
    elif verbosity >= 2:
        level = logging.DEBUG
    logging.basicConfig(
        level=level,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
        force=True,
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    """CLI entry point: parse args, run the command, return the exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)
    _configure_logging(args.verbose)

    # Detect if colors should be used
    use_color = (
        args.color
        and os.getenv("NO_COLOR") is None
        and (sys.stdout.isatty() or bool(os.getenv("FORCE_COLOR")))
        and not args.output
    )

    try:
        config = config_from_args(args)
        if config.command == "verify":
            return cmd_verify(config, use_color)
        return COMMANDS[config.command](config)
    except InvalidParamsError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except ZtselectError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as e:
        print(f"Error writing output: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
