"""
Reference solutions for small instances.

``brute_force_cwrs`` enumerates every grid allocation of every tone and
keeps the best one meeting the budgets. It is exponential in ``N * K`` and
only meant for tests and the ``oracle`` command.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Tuple

import numpy as np
from scipy.optimize import brentq

from .exceptions import OracleLimitError, SolverError
from .model import LN2, Scenario, SpectrumAllocation, weighted_rate_sum
from .pertone import PowerGrid, ProxConfig, _grid_combinations, stacked_problem

logger = logging.getLogger(__name__)

DEFAULT_ORACLE_CAP = 10**7


@dataclass(frozen=True)
class OracleResult:
    best_value: float
    best_alloc: SpectrumAllocation
    enumerated: int


def brute_force_cwrs(
    scenario: Scenario,
    grid: PowerGrid = PowerGrid(),
    cap: int = DEFAULT_ORACLE_CAP,
    budget_rtol: float = 1e-12,
) -> OracleResult:
    """Best feasible grid allocation of the whole scenario.

    Allocations are visited in lexicographic order, tone 0 slowest and user 0
    slowest within a tone; the first one attaining the maximum is returned.
    Partial allocations already over budget are pruned.
    """
    _, n_points = grid_shape(scenario, grid)
    if n_points > cap:
        raise OracleLimitError(
            f"Oracle would enumerate {grid.size}^({scenario.n_users}*{scenario.n_tones})"
            f" = {n_points} points, cap is {cap}"
        )
    logger.info(f"🔍 Enumerating {n_points} allocations of '{scenario.name}'")

    problem = stacked_problem(scenario)
    limit = scenario.power_budget * (1.0 + budget_rtol)
    prox = ProxConfig.off()
    no_multipliers = np.zeros(scenario.n_users)

    totals = np.zeros((1, scenario.n_users))
    values = np.zeros(1)
    choices = np.zeros((1, 0), dtype=int)
    for k in range(scenario.n_tones):
        tone = problem.select(k)
        combos = _grid_combinations(grid.levels(tone.upper), cap)
        tone_values = tone.lagrangian(combos, no_multipliers, prox)
        # frontier index slowest, combination fastest
        new_totals = (totals[:, None, :] + combos[None, :, :]).reshape(-1, scenario.n_users)
        new_values = (values[:, None] + tone_values[None, :]).reshape(-1)
        keep = np.all(new_totals <= limit, axis=1)
        parents, picks = np.divmod(np.flatnonzero(keep), combos.shape[0])
        totals, values = new_totals[keep], new_values[keep]
        choices = np.column_stack([choices[parents], picks])
        if values.size == 0:
            raise SolverError("no grid allocation meets the power budgets")

    best = int(np.argmax(values))
    rows = []
    for k, pick in enumerate(choices[best]):
        combos = _grid_combinations(grid.levels(problem.select(k).upper), cap)
        rows.append(combos[pick])
    allocation = SpectrumAllocation(np.stack(rows))
    return OracleResult(weighted_rate_sum(scenario, allocation), allocation, n_points)


def _waterfill(scenario: Scenario, lam: float) -> np.ndarray:
    gap = scenario.constants.snr_gap
    fs = scenario.constants.symbol_rate_hz
    floor = gap * scenario.noise[:, 0] / scenario.gains_sq[:, 0, 0]
    level = scenario.weights[0] * fs / (lam * LN2)
    return np.clip(level - floor, 0.0, scenario.upper[:, 0])


def waterfilling_multiplier(scenario: Scenario) -> float:
    """Multiplier at which single-user water-filling meets the budget.

    0 if the budget is slack or the user has zero weight.
    """
    if scenario.n_users != 1:
        raise ValueError("water-filling applies to single-user scenarios")
    budget = float(scenario.power_budget[0])
    if scenario.weights[0] == 0 or float(np.sum(scenario.upper)) <= budget:
        return 0.0

    def excess(lam: float) -> float:
        return float(np.sum(_waterfill(scenario, lam))) - budget

    gap = scenario.constants.snr_gap
    floor = gap * scenario.noise[:, 0] / scenario.gains_sq[:, 0, 0]
    hi = scenario.weights[0] * scenario.constants.symbol_rate_hz / (LN2 * float(floor.min()))
    lo = hi
    while excess(lo) <= 0:
        lo *= 0.5
    return float(brentq(excess, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps))


def waterfilling_1user(scenario: Scenario) -> SpectrumAllocation:
    """Optimal single-user spectrum under mask and budget; all off at zero weight."""
    lam = waterfilling_multiplier(scenario)
    if scenario.weights[0] == 0:
        return SpectrumAllocation(np.zeros_like(scenario.upper))
    if lam == 0.0:
        return SpectrumAllocation(scenario.upper.copy())
    return SpectrumAllocation(_waterfill(scenario, lam)[:, None])


def finite_diff_gradient(
    fn: Callable[[np.ndarray], float], point: np.ndarray, step: float = 1e-6
) -> np.ndarray:
    """Central-difference gradient of ``fn`` at ``point``."""
    if step <= 0:
        raise ValueError("step must be positive")
    point = np.asarray(point, dtype=float)
    grad = np.empty_like(point)
    for i in np.ndindex(point.shape):
        forward, backward = point.copy(), point.copy()
        forward[i] += step
        backward[i] -= step
        grad[i] = (fn(forward) - fn(backward)) / (2.0 * step)
    return grad


def grid_shape(scenario: Scenario, grid: PowerGrid) -> Tuple[int, int]:
    """Per-tone combinations and total allocations the oracle would visit."""
    per_tone = grid.size**scenario.n_users
    return per_tone, per_tone**scenario.n_tones
