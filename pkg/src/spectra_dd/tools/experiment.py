"""
Experiment runner: head-to-head solver comparisons on one scenario family.

An experiment spec names a preset, a scenario file or a random family,
the seeds and a list of solver configurations. Every run writes a trace
CSV and a spectra CSV; ``summary.json`` collects the outcome of all runs.
"""

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    NonNegativeFloat,
    PositiveFloat,
    PositiveInt,
    ValidationError,
    model_validator,
)

from ..core.convex_approx import ConvexApprox, build_approx
from ..core.dual_solvers import (
    SolverConfig,
    SolverReport,
    dual_minimum,
    dual_value,
    solve,
    solve_improved,
    solve_subgradient,
)
from ..core.exceptions import ConfigurationError, SpectraError
from ..core.model import Scenario, objective_scale, user_rates, weighted_rate_sum
from ..core.pertone import ProxConfig, ToneSolver
from ..preprocessing.channel_model import random_scenario
from ..preprocessing.scenario_io import (
    load_scenario,
    save_allocation,
    save_trace,
    summary_record,
)
from ..preprocessing.schema import format_validation_error, read_document
from .presets import PRESETS, preset

logger = logging.getLogger(__name__)


class RandomFamily(BaseModel):
    model_config = ConfigDict(extra="forbid")

    n_users: PositiveInt = 2
    n_tones: PositiveInt = 8
    crosstalk: NonNegativeFloat = 0.01
    budget_fraction: PositiveFloat = 0.6


class ExperimentSpec(BaseModel):
    """What to run and where to write it."""

    model_config = ConfigDict(extra="forbid")

    name: str = "experiment"
    scenario: Optional[str] = None
    random: Optional[RandomFamily] = None
    tone_stride: PositiveInt = 1
    seeds: List[int] = Field(default_factory=lambda: [0])
    solvers: List[SolverConfig] = Field(min_length=1)
    output_dir: str = "results"
    jobs: PositiveInt = 1

    @model_validator(mode="after")
    def _check(self) -> "ExperimentSpec":
        if (self.scenario is None) == (self.random is None):
            raise ValueError("give exactly one of 'scenario' or 'random'")
        names = [s.name for s in self.solvers]
        duplicates = sorted({n for n in names if names.count(n) > 1})
        if duplicates:
            raise ValueError(f"solver labels must be unique, repeated: {duplicates}")
        return self


def load_experiment(path: Union[str, Path]) -> ExperimentSpec:
    data = read_document(path)
    try:
        return ExperimentSpec.model_validate(data)
    except ValidationError as e:
        raise ConfigurationError(
            f"Invalid experiment spec {path}:\n{format_validation_error(e)}"
        ) from e


def resolve_scenario(reference: str, tone_stride: int = 1) -> Scenario:
    """A preset name, or else a path to a scenario file."""
    if reference in PRESETS:
        return preset(reference, tone_stride)
    return load_scenario(reference)


def _scenarios(spec: ExperimentSpec) -> List[Tuple[Optional[int], Scenario]]:
    if spec.random is not None:
        family = spec.random
        return [
            (
                seed,
                random_scenario(
                    family.n_users,
                    family.n_tones,
                    seed=seed,
                    crosstalk=family.crosstalk,
                    budget_fraction=family.budget_fraction,
                ),
            )
            for seed in spec.seeds
        ]
    assert spec.scenario is not None
    # named and file scenarios are deterministic, so seeds do not apply
    return [(None, resolve_scenario(spec.scenario, spec.tone_stride))]


@dataclass
class ExperimentResult:
    summary: Dict[str, Any]
    summary_path: Path
    reports: List[Optional[SolverReport]] = field(default_factory=list)

    @property
    def failures(self) -> List[Dict[str, Any]]:
        return [run for run in self.summary["runs"] if run["error"] is not None]


def _run_one(
    scenario: Scenario, seed: Optional[int], config: SolverConfig, out_dir: Path
) -> Tuple[Dict[str, Any], Optional[SolverReport]]:
    stem = config.name if seed is None else f"{config.name}_seed{seed}"
    record: Dict[str, Any] = {
        "label": config.name,
        "solver": config.solver,
        "pertone": config.pertone,
        "interleaving": config.interleaving,
        "seed": seed,
        "scenario": scenario.name,
        "error": None,
    }
    try:
        report = solve(scenario, config)
    except SpectraError as e:
        logger.warning(f"⚠️ {stem} failed: {e}")
        record["error"] = str(e)
        return record, None

    trace_file = save_trace(out_dir / f"{stem}_trace.csv", report)
    spectra_file = save_allocation(out_dir / f"{stem}_spectra.csv", scenario, report.allocation)
    record.update(
        summary_record(
            {
                "iterations": report.iterations,
                "converged": report.converged,
                "weighted_rate": weighted_rate_sum(scenario, report.allocation),
                "user_rates": user_rates(scenario, report.allocation),
                "user_power": report.total_power,
                "budget": scenario.power_budget,
                "lam": report.lam,
                "violation_norm": report.violation_norm(scenario),
                "max_complementarity": report.max_complementarity(scenario),
                "outer_iterations": len(report.outer_trace),
                "wall_time_s": report.wall_time_s,
                "trace_file": trace_file.name,
                "spectra_file": spectra_file.name,
            }
        )
    )
    return record, report


def run_experiment(spec: ExperimentSpec, output_dir: Optional[Union[str, Path]] = None) -> ExperimentResult:
    """Run every solver on every scenario of ``spec`` and write the results."""
    out_dir = Path(output_dir or spec.output_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ConfigurationError(f"Cannot create output directory {out_dir}: {e}") from e

    jobs = [
        (scenario, seed, config)
        for seed, scenario in _scenarios(spec)
        for config in spec.solvers
    ]
    logger.info(f"🚀 Experiment '{spec.name}': {len(jobs)} runs, {spec.jobs} worker(s)")
    if spec.jobs > 1:
        with ThreadPoolExecutor(max_workers=spec.jobs) as pool:
            results = list(pool.map(lambda job: _run_one(*job, out_dir), jobs))
    else:
        results = [_run_one(*job, out_dir) for job in jobs]

    summary = {
        "experiment": spec.name,
        "scenario": spec.scenario,
        "runs": [record for record, _ in results],
    }
    summary_path = out_dir / "summary.json"
    with open(summary_path, "w", encoding="utf-8") as f:
        json.dump(summary, f, indent=2)
    logger.info(f"💾 Wrote summary to {summary_path}")
    return ExperimentResult(summary, summary_path, [report for _, report in results])


@dataclass
class ConvergenceComparison:
    """Iterations needed to bring the dual value within ``accuracy`` of its minimum."""

    accuracy: float
    reference_value: float
    improved_iterations: Optional[int]
    subgradient_iterations: Dict[float, Optional[int]]
    step_scale: float = 1.0

    def speedup(self) -> Optional[float]:
        """Fewest subgradient iterations over improved iterations; inf if no q converged."""
        if self.improved_iterations is None:
            return None
        reached = [n for n in self.subgradient_iterations.values() if n is not None]
        if not reached:
            return float("inf")
        return min(reached) / self.improved_iterations


def iterations_to_accuracy(
    values: Sequence[float], reference: float, accuracy: float
) -> Optional[int]:
    """1-based index of the first value within ``accuracy`` (relative) of ``reference``."""
    for i, value in enumerate(values):
        if value - reference <= accuracy * abs(reference):
            return i + 1
    return None


def compare_convergence(
    scenario: Scenario,
    q_values: Sequence[float] = (1e-4, 1e-3, 1e-2, 1e-1),
    accuracy: float = 5e-4,
    max_iters: int = 500,
    config: Optional[SolverConfig] = None,
    approx: Optional[ConvexApprox] = None,
    relative_q: bool = False,
) -> ConvergenceComparison:
    """Improved scheme against ``q/i`` subgradient steps on one convex approximation.

    ``q_values`` are initial stepsizes in (bit/s per mW) per mW of residual.
    With ``relative_q`` they are multiplied by ``objective_scale / ||P||^2``,
    the normalization behind ``SolverConfig.q_rel``. A ``q`` near the
    multiplier scale lands close to the optimum within a couple of steps,
    so the comparison is about untuned stepsizes.

    Every multiplier iterate of both schemes is scored by the unsmoothed
    dual value with the same exact per-tone solver, against the dual
    minimum found by :func:`dual_minimum`.
    """
    base = config or SolverConfig(pertone="fixedpoint", inner_iters=20, inner_tol=1e-10)
    approx = approx or build_approx(scenario, scenario.flat_allocation())
    exact = ToneSolver("lbfgsb")
    budget = scenario.power_budget
    step_scale = objective_scale(scenario) / float(budget @ budget) if relative_q else 1.0

    def dual_trace(report: SolverReport) -> List[float]:
        return [
            dual_value(scenario, np.array(row.lam), ProxConfig.off(), exact, approx)
            for row in report.trace
        ]

    improved = solve_improved(
        scenario,
        base.model_copy(update={"solver": "improved-convex", "i_max": max_iters}),
        approx,
        log_outcome=False,
    )
    traces = {"improved": dual_trace(improved)}
    for q in q_values:
        sub_config = base.model_copy(
            update={
                "solver": "subgradient",
                "stepsize_rule": "decreasing",
                "q": q * step_scale,
                "i_max": max_iters,
                # run the full budget, convergence is judged on the dual values
                "epsilon_a": 1e-300,
            }
        )
        traces[f"q={q:g}"] = dual_trace(solve_subgradient(scenario, sub_config, approx))

    minimum, _ = dual_minimum(scenario, exact, approx, lam0=improved.lam)
    reference = min([minimum] + [min(values) for values in traces.values()])
    result = ConvergenceComparison(
        accuracy=accuracy,
        reference_value=reference,
        improved_iterations=iterations_to_accuracy(traces["improved"], reference, accuracy),
        subgradient_iterations={
            q: iterations_to_accuracy(traces[f"q={q:g}"], reference, accuracy)
            for q in q_values
        },
        step_scale=step_scale,
    )
    logger.info(
        f"📊 Iterations to {accuracy:.2%}: improved {result.improved_iterations}, "
        f"subgradient {result.subgradient_iterations}"
    )
    return result
