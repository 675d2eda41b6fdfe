#!/usr/bin/env python3
"""
Command-line entry point for Spectra DD.
Solves, checks and compares spectrum-balancing runs from one command.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from pydantic import ValidationError
from rich.logging import RichHandler

from .. import __version__
from ..core.exceptions import ConfigurationError, SpectraError
from ..core.model import Scenario
from ..preprocessing.schema import format_validation_error
from ..ui.console_ui import ConsoleUI
from .presets import PRESETS, list_presets

logger = logging.getLogger(__name__)

SOLVER_CHOICES = ("subgradient", "improved-direct", "improved-convex", "ica-dsb")
PERTONE_CHOICES = ("exhaustive", "isb", "fixedpoint", "multistart", "lbfgsb")


def _add_scenario_args(parser: argparse.ArgumentParser, allow_random: bool = False):
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--scenario", help="Scenario file (JSON or YAML)")
    source.add_argument("--preset", choices=sorted(PRESETS), help="Named preset scenario")
    if allow_random:
        source.add_argument(
            "--random", nargs=2, type=int, metavar=("USERS", "TONES"),
            help="Seeded random scenario of the given size",
        )
        parser.add_argument("--seed", type=int, default=0, help="Seed for --random")
    parser.add_argument("--tone-stride", type=int, default=1,
                        help="Keep every n-th tone of a preset band plan (default: 1)")


def _add_grid_args(parser: argparse.ArgumentParser):
    parser.add_argument("--grid-step-db", type=float, help="Power grid step in dB")
    parser.add_argument("--grid-floor-db", type=float, help="Power grid depth in dB")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spectra-dd",
        description="DSL spectrum balancing by (improved) Lagrange dual decomposition",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  spectra-dd preset --list                                  # List presets
  spectra-dd solve --preset adsl-nearfar-2 --tone-stride 4  # Solve with I-CA-DSB
  spectra-dd solve --scenario s.json --solver improved-direct --interleave on
  spectra-dd oracle --scenario tiny.json --grid-step-db 10  # Brute-force reference
  spectra-dd experiment experiments/nearfar.yaml            # Head-to-head runs
  spectra-dd verify-theorem2 --random 2 8 --epsilon 1e-2    # Check the guarantees
        """,
    )
    parser.add_argument("--version", action="version", version=f"Spectra DD {__version__}")
    parser.add_argument("--verbose", "-v", action="store_true", help="Debug logging")

    subparsers = parser.add_subparsers(dest="command", help="Available commands")

    # Solve command
    solve_parser = subparsers.add_parser("solve", help="Run a dual solver on a scenario")
    _add_scenario_args(solve_parser)
    solve_parser.add_argument("--config", help="Solver config file (JSON or YAML)")
    solve_parser.add_argument("--solver", choices=SOLVER_CHOICES)
    solve_parser.add_argument("--pertone", choices=PERTONE_CHOICES)
    solve_parser.add_argument("--epsilon", type=float, help="Absolute smoothing accuracy")
    solve_parser.add_argument("--epsilon-a", type=float, help="Absolute complementarity tolerance")
    solve_parser.add_argument("--interleave", choices=("on", "off"))
    solve_parser.add_argument("--primal", choices=("last", "averaged"))
    solve_parser.add_argument("--i-max", type=int, help="Iteration budget")
    solve_parser.add_argument("--q", type=float, help="Absolute subgradient stepsize")
    solve_parser.add_argument("--stepsize", choices=("decreasing", "adaptive", "optimal-gradient"))
    solve_parser.add_argument("--tie-rel-tol", type=float, help="Relative tie tolerance")
    _add_grid_args(solve_parser)
    solve_parser.add_argument("--trace", help="Write the iteration trace CSV here")
    solve_parser.add_argument("--spectra", help="Write the spectra CSV (dBm/Hz) here")
    solve_parser.add_argument("--dump-approx", help="Write the initial convex approximation as JSON")
    solve_parser.add_argument("--require-convergence", action="store_true",
                              help="Exit with 1 when the solver does not converge")

    # Oracle command
    oracle_parser = subparsers.add_parser("oracle", help="Brute-force optimum on a small scenario")
    _add_scenario_args(oracle_parser)
    _add_grid_args(oracle_parser)
    oracle_parser.add_argument("--grid-levels", type=float, nargs="+",
                               help="Explicit grid fractions of the box bound (must include 0 and 1)")
    oracle_parser.add_argument("--cap", type=int, default=10**7, help="Enumeration cap")
    oracle_parser.add_argument("--spectra", help="Write the optimal spectra CSV here")

    # Preset command
    preset_parser = subparsers.add_parser("preset", help="List or export preset scenarios")
    preset_parser.add_argument("name", nargs="?", choices=sorted(PRESETS))
    preset_parser.add_argument("--list", "-l", action="store_true", help="List presets")
    preset_parser.add_argument("--output", "-o", help="Write the scenario as JSON")
    preset_parser.add_argument("--tone-stride", type=int, default=1)

    # Experiment command
    experiment_parser = subparsers.add_parser("experiment", help="Run an experiment spec")
    experiment_parser.add_argument("spec", help="Experiment spec file (JSON or YAML)")
    experiment_parser.add_argument("--output-dir", help="Override the spec's output directory")
    experiment_parser.add_argument("--jobs", type=int, help="Parallel solver runs")

    # Theorem check command
    verify_parser = subparsers.add_parser(
        "verify-theorem2", help="Check the duality-gap and feasibility bounds"
    )
    _add_scenario_args(verify_parser, allow_random=True)
    verify_parser.add_argument("--epsilon", type=float, nargs="+", default=[1e-1, 1e-2])
    verify_parser.add_argument("--reference-factor", type=float, default=100.0)
    verify_parser.add_argument("--pertone", choices=("lbfgsb", "fixedpoint"), default="lbfgsb")
    verify_parser.add_argument("--output", "-o", help="Write the check records as JSON")

    return parser


def configure_logging(verbose: bool):
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(message)s",
        handlers=[RichHandler(show_path=False)],
        force=True,
    )


def load_scenario_arg(args: argparse.Namespace) -> Scenario:
    """Scenario selected by ``--scenario``, ``--preset`` or ``--random``."""
    if getattr(args, "random", None):
        from ..preprocessing.channel_model import random_scenario

        n_users, n_tones = args.random
        return random_scenario(n_users, n_tones, seed=args.seed)
    if args.preset:
        from .presets import preset

        return preset(args.preset, args.tone_stride)
    from ..preprocessing.scenario_io import load_scenario

    return load_scenario(args.scenario)


def solver_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    """Config fields given on the command line."""
    flags = {
        "solver": args.solver,
        "pertone": args.pertone,
        "epsilon": args.epsilon,
        "epsilon_a": args.epsilon_a,
        "primal": args.primal,
        "i_max": args.i_max,
        "q": args.q,
        "stepsize_rule": args.stepsize,
        "tie_rel_tol": args.tie_rel_tol,
        "grid_step_db": args.grid_step_db,
        "grid_floor_db": args.grid_floor_db,
    }
    overrides = {key: value for key, value in flags.items() if value is not None}
    if args.interleave is not None:
        overrides["interleaving"] = args.interleave == "on"
    return overrides


def build_solver_config(args: argparse.Namespace):
    from ..core.dual_solvers import SolverConfig, load_solver_config

    base = load_solver_config(args.config) if args.config else SolverConfig()
    merged = base.model_dump(exclude_unset=True)
    merged.update(solver_overrides(args))
    try:
        return SolverConfig.model_validate(merged)
    except ValidationError as e:
        raise ConfigurationError(f"Invalid solver options:\n{format_validation_error(e)}") from e


def run_solve(args: argparse.Namespace, ui: ConsoleUI) -> int:
    from ..core.convex_approx import build_approx, dump_approx
    from ..core.dual_solvers import solve
    from ..core.model import user_rates, weighted_rate_sum
    from ..preprocessing.scenario_io import save_allocation, save_trace

    scenario = load_scenario_arg(args)
    config = build_solver_config(args)
    if args.dump_approx:
        dump_approx(args.dump_approx, build_approx(scenario, scenario.flat_allocation()))

    ui.show_title(f"Solving '{scenario.name}' with {config.name}")
    report = solve(scenario, config)
    rates = user_rates(scenario, report.allocation)
    ui.table(
        [
            {
                "user": n + 1,
                "rate_bps": float(rates[n]),
                "power_mw": float(report.total_power[n]),
                "budget_mw": float(scenario.power_budget[n]),
                "lambda": float(report.lam[n]),
            }
            for n in range(scenario.n_users)
        ],
        title="Per-user result",
    )
    ui.show_info(f"Weighted rate sum: {weighted_rate_sum(scenario, report.allocation):.6g} bit/s")
    ui.show_step(f"iterations: {report.iterations}, wall time {report.wall_time_s:.2f} s")
    ui.show_step(f"violation norm: {report.violation_norm(scenario):.3e}")

    if args.trace:
        save_trace(args.trace, report)
        ui.show_success(f"Trace written to {args.trace}")
    if args.spectra:
        save_allocation(args.spectra, scenario, report.allocation)
        ui.show_success(f"Spectra written to {args.spectra}")

    if report.converged:
        ui.show_success(f"Converged after {report.iterations} iterations")
        return 0
    ui.show_warning(f"Stopped after {report.iterations} iterations without converging")
    return 1 if args.require_convergence else 0


def run_oracle(args: argparse.Namespace, ui: ConsoleUI) -> int:
    from ..core.oracle import brute_force_cwrs
    from ..core.pertone import PowerGrid
    from ..preprocessing.scenario_io import save_allocation

    scenario = load_scenario_arg(args)
    default = PowerGrid()
    grid = PowerGrid(
        floor_db=default.floor_db if args.grid_floor_db is None else args.grid_floor_db,
        step_db=default.step_db if args.grid_step_db is None else args.grid_step_db,
        fractions=None if args.grid_levels is None else tuple(args.grid_levels),
    )
    result = brute_force_cwrs(scenario, grid, cap=args.cap)
    ui.show_success(f"Best weighted rate: {result.best_value:.12g} bit/s")
    ui.show_step(f"enumerated {result.enumerated} allocations")
    ui.table(
        [
            {"user": n + 1, "power_mw": float(p), "budget_mw": float(b)}
            for n, (p, b) in enumerate(
                zip(result.best_alloc.total_power, scenario.power_budget)
            )
        ]
    )
    if args.spectra:
        save_allocation(args.spectra, scenario, result.best_alloc)
        ui.show_success(f"Spectra written to {args.spectra}")
    return 0


def run_preset(args: argparse.Namespace, ui: ConsoleUI) -> int:
    if args.list or not args.name:
        ui.table([{"preset": name, "description": text} for name, text in list_presets()])
        return 0

    from ..preprocessing.scenario_io import save_scenario
    from .presets import preset

    scenario = preset(args.name, args.tone_stride)
    ui.show_info(
        f"{scenario.name}: {scenario.n_users} users, {scenario.n_tones} tones "
        f"(indices {int(scenario.tone_indices[0])}..{int(scenario.tone_indices[-1])})"
    )
    if args.output:
        save_scenario(args.output, scenario)
        ui.show_success(f"Scenario written to {args.output}")
    return 0


def run_experiment_command(args: argparse.Namespace, ui: ConsoleUI) -> int:
    from .experiment import load_experiment, run_experiment

    spec = load_experiment(args.spec)
    if args.jobs is not None:
        spec = spec.model_copy(update={"jobs": args.jobs})
    result = run_experiment(spec, args.output_dir)
    ui.table(
        [
            {
                "label": run["label"],
                "seed": run["seed"],
                "iterations": run.get("iterations", ""),
                "converged": run.get("converged", ""),
                "weighted_rate": run.get("weighted_rate", ""),
                "violation": run.get("violation_norm", ""),
                "error": run["error"] or "",
            }
            for run in result.summary["runs"]
        ],
        title=spec.name,
    )
    ui.show_success(f"Summary written to {result.summary_path}")
    for failure in result.failures:
        ui.show_error(f"{failure['label']}: {failure['error']}")
    return 1 if result.failures else 0


def run_verify(args: argparse.Namespace, ui: ConsoleUI) -> int:
    from .theorem_check import verify_theorem2

    scenario = load_scenario_arg(args)
    checks = [
        verify_theorem2(scenario, eps, args.reference_factor, pertone=args.pertone)
        for eps in args.epsilon
    ]
    ui.table(
        [
            {
                "epsilon": c.epsilon,
                "i_max": c.i_max,
                "gap": c.gap,
                "violation": c.violation,
                "violation_bound": c.violation_bound,
                "passed": "✅" if c.passed else "❌",
            }
            for c in checks
        ],
        title=f"Guarantee check on '{scenario.name}'",
    )
    if args.output:
        Path(args.output).parent.mkdir(parents=True, exist_ok=True)
        with open(args.output, "w", encoding="utf-8") as f:
            json.dump([c.as_dict() for c in checks], f, indent=2)
    failed = [c for c in checks if not c.passed]
    for check in failed:
        try:
            check.raise_for_failure()
        except SpectraError as e:
            ui.show_error(str(e))
    return 1 if failed else 0


COMMANDS = {
    "solve": run_solve,
    "oracle": run_oracle,
    "preset": run_preset,
    "experiment": run_experiment_command,
    "verify-theorem2": run_verify,
}


def interactive_menu(parser: argparse.ArgumentParser, ui: ConsoleUI) -> int:
    parser.print_help()
    print()
    ui.show_title("Spectra DD", "📡")
    ui.show_info("DSL spectrum balancing by dual decomposition")

    action = ui.select(
        "What would you like to do?",
        choices=[
            "🧮 Solve a preset scenario",
            "📋 List presets",
            "✅ Check the convergence guarantees on a random scenario",
            "❌ Exit",
        ],
    )
    if action is None or action.startswith("❌"):
        return 0
    if action.startswith("📋"):
        return run_preset(parser.parse_args(["preset", "--list"]), ui)
    if action.startswith("✅"):
        return run_verify(parser.parse_args(["verify-theorem2", "--random", "2", "8"]), ui)

    name = ui.select("Which preset?", choices=sorted(PRESETS))
    solver = ui.select("Which solver?", choices=list(SOLVER_CHOICES), default="ica-dsb")
    stride = ui.prompt("Tone stride", default="8")
    # questionary answers None when a prompt is dismissed
    if name is None or solver is None or stride is None:
        return 0
    if not ui.confirm(f"Solve '{name}' with {solver} at tone stride {stride}?"):
        return 0
    argv: List[str] = ["solve", "--preset", name, "--solver", solver, "--tone-stride", stride]
    return run_solve(parser.parse_args(argv), ui)


def main(argv: Optional[List[str]] = None) -> int:
    """Main CLI entry point."""
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.verbose)
    ui = ConsoleUI()

    try:
        if args.command is None:
            return interactive_menu(parser, ui)
        return COMMANDS[args.command](args, ui)
    except (SpectraError, FileNotFoundError) as e:
        ui.show_error(str(e))
        return 1
    except KeyboardInterrupt:
        ui.show_error("Operation cancelled by user")
        return 1


if __name__ == "__main__":
    sys.exit(main())
