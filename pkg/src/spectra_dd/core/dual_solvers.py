"""
Master-problem solvers over the Lagrange multipliers.

- :func:`solve_subgradient` - projected subgradient with ``q/i`` or adaptive steps
- :func:`solve_improved` - optimal-gradient scheme on the smoothed dual, either
  on a fixed convex approximation (averaged primal) or directly on the
  nonconvex per-tone problems (last iterate, complementarity stop)
- :func:`solve_ica_dsb` - outer loop refreshing the convex approximation
- :func:`recover_interleaved` - primal recovery when per-tone optima tie

The residual ``sum_k s_k(lam) - P`` returned by :func:`dual_subgradient` is
the ascent direction for the multipliers; it is the negative gradient of
the (smoothed) dual function.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import (
    BaseModel,
    ConfigDict,
    NonNegativeFloat,
    NonNegativeInt,
    PositiveFloat,
    PositiveInt,
    ValidationError,
    model_validator,
)
from scipy.optimize import Bounds, minimize

from ..preprocessing.schema import format_validation_error, read_document
from .convex_approx import ConvexApprox, build_approx
from .exceptions import ConfigurationError, SolverError
from .model import Scenario, SpectrumAllocation, objective_scale, weighted_rate_sum
from .pertone import (
    CONVEXITY_PARAMETER,
    PerToneSolution,
    PowerGrid,
    ProxConfig,
    ToneSolver,
    ToneSweep,
    interleave_index,
    prox_diameter,
)

logger = logging.getLogger(__name__)

SOLVER_NAMES = ("subgradient", "improved-direct", "improved-convex", "ica-dsb")


class SolverConfig(BaseModel):
    """Configuration of one dual solver run.

    Absolute tolerances (``epsilon``, ``epsilon_a``, ``q``) win over their
    ``*_rel`` counterparts, which are relative to the weighted rate sum of
    the flat allocation.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    label: Optional[str] = None
    solver: Literal["subgradient", "improved-direct", "improved-convex", "ica-dsb"] = (
        "ica-dsb"
    )
    epsilon: Optional[PositiveFloat] = None
    epsilon_rel: PositiveFloat = 5e-4
    epsilon_a: Optional[PositiveFloat] = None
    epsilon_a_rel: PositiveFloat = 5e-4
    feasibility_rel_tol: NonNegativeFloat = 5e-3
    i_max: Optional[PositiveInt] = None
    i_max_floor: NonNegativeInt = 50
    i_max_cap: PositiveInt = 1000
    subgradient_i_max: PositiveInt = 500
    stepsize_rule: Optional[Literal["decreasing", "adaptive", "optimal-gradient"]] = None
    q: Optional[PositiveFloat] = None
    q_rel: PositiveFloat = 0.1
    interleaving: bool = False
    pertone: Literal["exhaustive", "isb", "fixedpoint", "multistart", "lbfgsb"] = (
        "fixedpoint"
    )
    grid_step_db: PositiveFloat = 1.0
    grid_floor_db: NonNegativeFloat = 60.0
    grid_levels: Optional[List[float]] = None
    tie_rel_tol: NonNegativeFloat = 1e-3
    inner_iters: NonNegativeInt = 3
    inner_tol: Optional[PositiveFloat] = None
    primal: Optional[Literal["last", "averaged"]] = None
    outer_max: PositiveInt = 50
    outer_rel_tol: PositiveFloat = 1e-4
    max_grid_points: PositiveInt = 1_000_000

    @model_validator(mode="after")
    def _check_stepsize_rule(self) -> "SolverConfig":
        rule = self.stepsize_rule
        if rule is None:
            return self
        if self.solver == "subgradient" and rule == "optimal-gradient":
            raise ValueError("the subgradient solver takes 'decreasing' or 'adaptive' steps")
        if self.solver != "subgradient" and rule != "optimal-gradient":
            raise ValueError(f"solver '{self.solver}' only supports 'optimal-gradient'")
        return self

    @property
    def name(self) -> str:
        return self.label or f"{self.solver}-{self.pertone}"

    @property
    def rule(self) -> str:
        if self.stepsize_rule is not None:
            return self.stepsize_rule
        return "decreasing" if self.solver == "subgradient" else "optimal-gradient"

    def tone_solver(self) -> ToneSolver:
        grid = PowerGrid(
            floor_db=self.grid_floor_db,
            step_db=self.grid_step_db,
            fractions=None if self.grid_levels is None else tuple(self.grid_levels),
        )
        return ToneSolver(
            method=self.pertone,
            grid=grid,
            tie_rel_tol=self.tie_rel_tol,
            inner_iters=self.inner_iters,
            tol=self.inner_tol,
            max_grid_points=self.max_grid_points,
        )

    def resolve_epsilon(self, scale: float) -> float:
        return self.epsilon if self.epsilon is not None else self.epsilon_rel * scale

    def resolve_epsilon_a(self, scale: float) -> float:
        return self.epsilon_a if self.epsilon_a is not None else self.epsilon_a_rel * scale

    def resolve_q(self, scale: float, budget: np.ndarray) -> float:
        if self.q is not None:
            return self.q
        return self.q_rel * scale / float(budget @ budget)


def load_solver_config(path: Union[str, Path]) -> SolverConfig:
    """Read a :class:`SolverConfig` from a JSON or YAML file."""
    data = read_document(path)
    try:
        return SolverConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigurationError(
            f"Invalid solver config {path}:\n{format_validation_error(e)}"
        ) from e


@dataclass(frozen=True)
class SmoothingSchedule:
    """Smoothing parameter, gradient Lipschitz constant and iteration budget."""

    epsilon: float
    c: float
    lipschitz: float
    d_total: float
    i_max: int

    def scaled_i_max(self, multiplier_scale: float) -> int:
        """``i_max`` with the multipliers measured in units of ``multiplier_scale``.

        The formulaic budget takes ``||lam*|| ~ 1``; with rates in bit/s and
        powers in mW the multipliers are of order ``objective / ||P||``, so
        the bound is rescaled by that factor.
        """
        bound = 2.0 * multiplier_scale * math.sqrt(self.lipschitz * self.c * self.d_total)
        return max(1, math.ceil(bound / self.epsilon) - 1)


def multiplier_scale(scenario: Scenario, scale: Optional[float] = None) -> float:
    """Typical multiplier size ``objective_scale / ||P||`` in bit/s per mW."""
    scale = objective_scale(scenario) if scale is None else scale
    return scale / float(np.linalg.norm(scenario.power_budget))


def smoothing_schedule(scenario: Scenario, epsilon: float) -> SmoothingSchedule:
    """``c = eps / sum D``, ``L = sum 1/(c sigma)``, ``i_max + 1 = 2 sqrt(sum 1/sigma * sum D) / eps``."""
    if epsilon <= 0:
        raise ConfigurationError("epsilon must be positive")
    d_total = float(np.sum(prox_diameter(scenario.upper)))
    if d_total <= 0:
        raise ConfigurationError("the power box is empty; nothing to smooth")
    inverse_sigma = scenario.n_tones / CONVEXITY_PARAMETER
    c = epsilon / d_total
    lipschitz = inverse_sigma / c
    i_max = max(1, math.ceil(2.0 * math.sqrt(inverse_sigma * d_total) / epsilon) - 1)
    return SmoothingSchedule(epsilon, c, lipschitz, d_total, i_max)


def averaging_weights(i_max: int) -> np.ndarray:
    """Primal averaging weights ``2(i+1) / ((i_max+1)(i_max+2))``, i = 0..i_max."""
    i = np.arange(i_max + 1, dtype=float)
    return 2.0 * (i + 1.0) / ((i_max + 1.0) * (i_max + 2.0))


@dataclass(frozen=True, eq=False)
class DualState:
    """Multipliers and auxiliary sequences of the optimal-gradient scheme."""

    lam: np.ndarray
    u: np.ndarray
    v: np.ndarray
    grad_accum: np.ndarray
    iteration: int
    lipschitz: float
    anchor: np.ndarray

    @classmethod
    def initial(
        cls, n_users: int, lipschitz: float, lam0: Optional[np.ndarray] = None
    ) -> "DualState":
        if lipschitz <= 0:
            raise ValueError("lipschitz must be positive")
        lam = np.zeros(n_users) if lam0 is None else np.maximum(np.asarray(lam0, float), 0)
        return cls(
            lam=lam.copy(),
            u=lam.copy(),
            v=lam.copy(),
            grad_accum=np.zeros(n_users),
            iteration=0,
            lipschitz=float(lipschitz),
            anchor=lam.copy(),
        )


def optimal_gradient_step(state: DualState, residual: np.ndarray) -> DualState:
    """One multiplier update of the optimal-gradient scheme.

    ``residual`` is ``sum_k s_k - P`` at ``state.lam``. With a zero anchor
    (the default start) ``v = [tmp / L]^+`` exactly.
    """
    i = state.iteration
    lipschitz = state.lipschitz
    u = np.maximum(residual / lipschitz + state.lam, 0.0)
    accum = state.grad_accum + 0.5 * (i + 1) * residual
    v = np.maximum(state.anchor + accum / lipschitz, 0.0)
    lam = (i + 1) / (i + 3) * u + 2.0 / (i + 3) * v
    return DualState(lam, u, v, accum, i + 1, lipschitz, state.anchor)


@dataclass(frozen=True)
class TraceRow:
    iteration: int
    dual_value: float
    violation_norm: float
    max_complementarity: float
    lam: tuple


@dataclass
class SolverReport:
    """Outcome of a dual solver run."""

    solver: str
    trace: List[TraceRow]
    allocation: SpectrumAllocation
    lam: np.ndarray
    converged: bool
    wall_time_s: float = 0.0
    outer_trace: List[float] = field(default_factory=list)
    schedule: Optional[SmoothingSchedule] = None
    final_sweep: Optional[ToneSweep] = None

    @property
    def iterations(self) -> int:
        return len(self.trace)

    @property
    def total_power(self) -> np.ndarray:
        return self.allocation.total_power

    def residual(self, scenario: Scenario) -> np.ndarray:
        return self.allocation.total_power - scenario.power_budget

    def violation_norm(self, scenario: Scenario) -> float:
        return float(np.linalg.norm(np.maximum(self.residual(scenario), 0.0)))

    def max_complementarity(self, scenario: Scenario) -> float:
        return float(np.max(np.abs(self.lam * self.residual(scenario))))


def _trace_row(i: int, value: float, lam: np.ndarray, residual: np.ndarray) -> TraceRow:
    return TraceRow(
        iteration=i,
        dual_value=float(value),
        violation_norm=float(np.linalg.norm(np.maximum(residual, 0.0))),
        max_complementarity=float(np.max(np.abs(lam * residual))),
        lam=tuple(float(x) for x in lam),
    )


def _stop(
    lam: np.ndarray,
    residual: np.ndarray,
    budget: np.ndarray,
    epsilon_a: float,
    feasibility_rel_tol: float,
) -> bool:
    """Complementarity below ``epsilon_a`` for every user, totals within tolerance."""
    balanced = np.all(np.abs(lam * residual) < epsilon_a)
    feasible = np.all(residual <= feasibility_rel_tol * budget)
    return bool(balanced and feasible)


def _check_lam(scenario: Scenario, lam: Sequence[float]) -> np.ndarray:
    lam = np.asarray(lam, dtype=float)
    if lam.shape != (scenario.n_users,):
        raise ValueError(f"expected {scenario.n_users} multipliers, got shape {lam.shape}")
    if np.any(lam < 0):
        raise ValueError("Lagrange multipliers must be non-negative")
    return lam


def dual_value(
    scenario: Scenario,
    lam: Sequence[float],
    prox: ProxConfig,
    solver: ToneSolver,
    approx: Optional[ConvexApprox] = None,
) -> float:
    """``sum_k max_s L_k(s, lam) + lam . P``; the smoothed dual when ``prox`` is on."""
    lam = _check_lam(scenario, lam)
    sweep = solver.sweep(scenario, lam, prox, approx)
    return float(np.sum(sweep.values) + lam @ scenario.power_budget)


def dual_minimum(
    scenario: Scenario,
    solver: ToneSolver,
    approx: Optional[ConvexApprox] = None,
    lam0: Optional[Sequence[float]] = None,
    max_iter: int = 500,
) -> Tuple[float, np.ndarray]:
    """Minimize the unsmoothed dual over ``lam >= 0`` with L-BFGS-B.

    The gradient is ``P - sum_k s_k(lam)``, exact where the per-tone
    maximizers are unique (the concave surrogate). Returns the value and
    the minimizer.
    """
    budget = scenario.power_budget
    start = np.zeros(scenario.n_users) if lam0 is None else _check_lam(scenario, lam0)

    def value_and_gradient(lam: np.ndarray) -> Tuple[float, np.ndarray]:
        lam = np.maximum(lam, 0.0)
        sweep = solver.sweep(scenario, lam, ProxConfig.off(), approx)
        residual = sweep.first().total_power - budget
        return float(np.sum(sweep.values) + lam @ budget), -residual

    result = minimize(
        value_and_gradient,
        start,
        jac=True,
        method="L-BFGS-B",
        bounds=Bounds(np.zeros(scenario.n_users), np.full(scenario.n_users, np.inf)),
        options={"maxiter": max_iter},
    )
    if not result.success:
        logger.debug(f"dual minimization stopped early: {result.message}")
    return float(result.fun), np.maximum(result.x, 0.0)


def dual_subgradient(
    scenario: Scenario,
    lam: Sequence[float],
    solver: ToneSolver,
    prox: Optional[ProxConfig] = None,
    approx: Optional[ConvexApprox] = None,
    interleave: bool = False,
) -> np.ndarray:
    """Constraint residual ``sum_k s_k(lam) - P`` at the per-tone maximizers."""
    lam = _check_lam(scenario, lam)
    sweep = solver.sweep(scenario, lam, prox or ProxConfig.off(), approx)
    return sweep.select(interleave).total_power - scenario.power_budget


def lipschitz_ratio(
    scenario: Scenario,
    lam: Sequence[float],
    mu: Sequence[float],
    solver: ToneSolver,
    prox: Optional[ProxConfig] = None,
    approx: Optional[ConvexApprox] = None,
) -> float:
    """``||sum s(lam) - sum s(mu)|| / ||lam - mu||`` for the chosen per-tone maximizer.

    Bounded by ``K / c`` on smoothed concave problems; unbounded jumps show up
    when per-tone optima switch between tied points.
    """
    lam = _check_lam(scenario, lam)
    mu = _check_lam(scenario, mu)
    distance = float(np.linalg.norm(lam - mu))
    if distance == 0:
        raise ValueError("lam and mu must differ")
    a = dual_subgradient(scenario, lam, solver, prox, approx)
    b = dual_subgradient(scenario, mu, solver, prox, approx)
    return float(np.linalg.norm(a - b)) / distance


def recover_interleaved(
    per_tone_ties: Sequence[PerToneSolution],
    tone_indices: Optional[Sequence[int]] = None,
) -> SpectrumAllocation:
    """Pick, on tone ``k`` (1-based), tie number ``rem(k, |C_k|) + 1``."""
    if tone_indices is None:
        tone_indices = range(1, len(per_tone_ties) + 1)
    rows = [
        solution.optima[interleave_index(k, solution.n_ties)].power
        for k, solution in zip(tone_indices, per_tone_ties)
    ]
    return SpectrumAllocation(np.stack(rows))


def solve_subgradient(
    scenario: Scenario,
    config: SolverConfig,
    approx: Optional[ConvexApprox] = None,
) -> SolverReport:
    """Projected subgradient iteration ``lam <- [lam + delta * residual]^+``."""
    rule = config.rule
    if rule not in ("decreasing", "adaptive"):
        raise ConfigurationError(f"subgradient iteration cannot use '{rule}' steps")
    started = time.perf_counter()
    budget = scenario.power_budget
    scale = objective_scale(scenario)
    epsilon_a = config.resolve_epsilon_a(scale)
    q = config.resolve_q(scale, budget)
    i_max = config.i_max or config.subgradient_i_max
    solver = config.tone_solver()
    prox = ProxConfig.off()
    logger.info(
        f"📊 Subgradient on '{scenario.name}': q={q:.3e}, rule={rule}, i_max={i_max}"
    )

    lam = np.zeros(scenario.n_users)
    steps = np.full(scenario.n_users, q)
    previous: Optional[np.ndarray] = None
    warm: Optional[SpectrumAllocation] = None
    trace: List[TraceRow] = []
    converged = False
    alloc = scenario.flat_allocation()
    lam_used = lam
    sweep = None
    for i in range(i_max):
        sweep = solver.sweep(scenario, lam, prox, approx, warm)
        alloc = sweep.select(config.interleaving)
        lam_used = lam
        residual = alloc.total_power - budget
        trace.append(_trace_row(i, np.sum(sweep.values) + lam @ budget, lam, residual))
        logger.debug(f"iter {i}: lam={lam}, residual={residual}")
        if _stop(lam, residual, budget, epsilon_a, config.feasibility_rel_tol):
            converged = True
            break
        if rule == "decreasing":
            delta = q / (i + 1)
        else:
            if previous is not None:
                flipped = np.sign(residual) * np.sign(previous) < 0
                steps = np.where(flipped, 0.5 * steps, 1.1 * steps)
            delta = steps
        previous = residual
        lam = np.maximum(lam + delta * residual, 0.0)
        warm = sweep.first()

    report = SolverReport(
        solver=config.name,
        trace=trace,
        allocation=alloc,
        lam=lam_used,
        converged=converged,
        wall_time_s=time.perf_counter() - started,
        final_sweep=sweep,
    )
    _log_outcome(report)
    return report


def solve_improved(
    scenario: Scenario,
    config: SolverConfig,
    approx: Optional[ConvexApprox] = None,
    warm_lam: Optional[np.ndarray] = None,
    warm_alloc: Optional[SpectrumAllocation] = None,
    log_outcome: bool = True,
) -> SolverReport:
    """Optimal-gradient scheme on the smoothed dual.

    With ``approx`` the per-tone problems are the concave surrogate, the run
    lasts exactly ``i_max + 1`` iterations and the weighted average of the
    per-tone solutions is returned. Without it the true per-tone problems
    are solved and the run stops on the complementarity test, returning
    the last iterate. ``config.primal`` overrides either primal choice.
    """
    convex = approx is not None
    started = time.perf_counter()
    budget = scenario.power_budget
    scale = objective_scale(scenario)
    schedule = smoothing_schedule(scenario, config.resolve_epsilon(scale))
    epsilon_a = config.resolve_epsilon_a(scale)
    if config.i_max is not None:
        i_max = config.i_max
    else:
        scaled = schedule.scaled_i_max(multiplier_scale(scenario, scale))
        i_max = min(max(scaled, config.i_max_floor), config.i_max_cap)
    primal = config.primal or ("averaged" if convex else "last")
    prox = ProxConfig.smoothing(schedule.c)
    solver = config.tone_solver()
    logger.info(
        f"📊 Improved dual decomposition ({'convex' if convex else 'direct'}) on "
        f"'{scenario.name}': c={schedule.c:.3e}, L={schedule.lipschitz:.3e}, i_max={i_max}"
    )

    state = DualState.initial(scenario.n_users, schedule.lipschitz, warm_lam)
    warm = warm_alloc
    trace: List[TraceRow] = []
    weights = averaging_weights(i_max)
    weighted_sum = np.zeros((scenario.n_tones, scenario.n_users))
    converged = False
    lam_last = state.lam
    last = scenario.flat_allocation()
    sweep = None
    for i in range(i_max + 1):
        sweep = solver.sweep(scenario, state.lam, prox, approx, warm)
        last = sweep.select(config.interleaving)
        lam_last = state.lam
        residual = last.total_power - budget
        value = np.sum(sweep.values) + state.lam @ budget
        trace.append(_trace_row(i, value, state.lam, residual))
        logger.debug(f"iter {i}: lam={state.lam}, residual={residual}")
        if not convex and _stop(state.lam, residual, budget, epsilon_a, config.feasibility_rel_tol):
            converged = True
            break
        weighted_sum += weights[i] * last.power
        state = optimal_gradient_step(state, residual)
        warm = sweep.first()

    # the averaged primal pairs with the final multipliers, the last iterate
    # with the multipliers it was computed at
    if primal == "averaged" and not converged:
        allocation = SpectrumAllocation(weighted_sum / np.sum(weights[: len(trace)]))
        lam_hat = state.lam
    else:
        allocation = last
        lam_hat = lam_last
    if convex:
        residual = allocation.total_power - budget
        converged = _stop(lam_hat, residual, budget, epsilon_a, config.feasibility_rel_tol)

    report = SolverReport(
        solver=config.name,
        trace=trace,
        allocation=allocation,
        lam=lam_hat,
        converged=converged,
        wall_time_s=time.perf_counter() - started,
        schedule=schedule,
        final_sweep=sweep,
    )
    if log_outcome:
        _log_outcome(report)
    return report


def solve_ica_dsb(scenario: Scenario, config: SolverConfig) -> SolverReport:
    """Successive convex approximation around the improved convex solver.

    Starts from the flat allocation, re-expands the surrogate at each
    returned primal and warm-starts the multipliers. Stops when the true
    weighted rate changes by less than ``outer_rel_tol`` (relative) or after
    ``outer_max`` outer iterations.
    """
    started = time.perf_counter()
    expansion = scenario.flat_allocation()
    lam: Optional[np.ndarray] = None
    trace: List[TraceRow] = []
    outer_trace: List[float] = []
    converged = False
    inner: Optional[SolverReport] = None
    for outer in range(config.outer_max):
        approx = build_approx(scenario, expansion)
        inner = solve_improved(
            scenario, config, approx, warm_lam=lam, warm_alloc=expansion, log_outcome=False
        )
        offset = len(trace)
        for row in inner.trace:
            trace.append(replace(row, iteration=offset + row.iteration))
        value = weighted_rate_sum(scenario, inner.allocation)
        logger.info(f"📊 Outer iteration {outer}: weighted rate {value:.6e}")
        expansion = inner.allocation
        lam = inner.lam
        previous = outer_trace[-1] if outer_trace else None
        outer_trace.append(value)
        if previous is not None and abs(value - previous) <= config.outer_rel_tol * abs(previous):
            converged = True
            break

    if inner is None:
        raise SolverError("outer loop made no iterations")
    report = SolverReport(
        solver=config.name,
        trace=trace,
        allocation=inner.allocation,
        lam=inner.lam,
        converged=converged,
        wall_time_s=time.perf_counter() - started,
        outer_trace=outer_trace,
        schedule=inner.schedule,
        final_sweep=inner.final_sweep,
    )
    _log_outcome(report)
    return report


def solve(scenario: Scenario, config: SolverConfig) -> SolverReport:
    """Run the solver named in ``config``."""
    if config.solver == "subgradient":
        return solve_subgradient(scenario, config)
    if config.solver == "improved-direct":
        return solve_improved(scenario, config)
    if config.solver == "improved-convex":
        approx = build_approx(scenario, scenario.flat_allocation())
        return solve_improved(scenario, config, approx)
    return solve_ica_dsb(scenario, config)


def _log_outcome(report: SolverReport) -> None:
    if report.converged:
        logger.info(f"✅ {report.solver} converged after {report.iterations} iterations")
    else:
        logger.warning(
            f"⚠️ {report.solver} stopped after {report.iterations} iterations without converging"
        )
