"""
Per-tone subproblems of the dual decomposition.

For fixed multipliers the Lagrangian separates over tones. This module
evaluates the per-tone objective and Lagrangian (optionally with the
``c/2 * ||s||^2`` prox term) and provides the per-tone maximizers:

- ``exhaustive``: full grid enumeration, reports every tied optimum
- ``isb``: discrete coordinate descent on the same grid
- ``fixedpoint``: closed-form KKT updates swept over users
- ``multistart``: fixed-point runs from several starts, ties collected
- ``lbfgsb``: box-constrained quasi-Newton ascent over all tones at once

Kernels are written against :class:`ToneProblem`, whose arrays may carry
any number of leading tone/start axes, so the same code serves a single
tone and a stacked sweep.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import Bounds, minimize

from .convex_approx import ConvexApprox, linearization_coefficients
from .exceptions import ConfigurationError, GridSizeError, SolverError
from .model import (
    LN2,
    PhysicalConstants,
    Scenario,
    SpectrumAllocation,
    ToneAllocation,
    ToneChannel,
    bit_loadings,
    interference,
    modified_gains,
)

logger = logging.getLogger(__name__)

PERTONE_METHODS = ("exhaustive", "isb", "fixedpoint", "multistart", "lbfgsb")

# Strong convexity of d(s) = 1/2 ||s||^2.
CONVEXITY_PARAMETER = 1.0


@dataclass(frozen=True)
class ProxConfig:
    """Smoothness parameter of the prox term ``c * d(s)``, ``d(s) = 1/2 ||s||^2``."""

    smoothness_c: float = 0.0
    enabled: bool = False

    def __post_init__(self) -> None:
        if self.smoothness_c < 0:
            raise ValueError("smoothness_c must be non-negative")
        if self.enabled and self.smoothness_c <= 0:
            raise ValueError("smoothness_c must be positive when the prox term is enabled")

    @classmethod
    def off(cls) -> "ProxConfig":
        return cls()

    @classmethod
    def smoothing(cls, c: float) -> "ProxConfig":
        return cls(smoothness_c=c, enabled=True)

    @property
    def c(self) -> float:
        """Effective coefficient; zero when disabled."""
        return self.smoothness_c if self.enabled else 0.0


def prox_function(power: np.ndarray) -> np.ndarray:
    return 0.5 * np.sum(np.square(power), axis=-1)


def prox_diameter(upper: np.ndarray) -> np.ndarray:
    """``D = max_{s in box} d(s) = 1/2 ||s_max||^2`` per tone."""
    return prox_function(upper)


@dataclass(frozen=True)
class PowerGrid:
    """Per-user discrete power levels as fractions of the box bound.

    The default ladder is ``{0}`` plus ``upper * 10^(-j*step/10)`` for
    ``j = 0 .. floor/step``. Explicit ``fractions`` override the ladder and
    must contain both 0 and 1.
    """

    floor_db: float = 60.0
    step_db: float = 1.0
    fractions: Optional[Tuple[float, ...]] = None

    def __post_init__(self) -> None:
        if self.step_db <= 0 or self.floor_db < 0:
            raise ConfigurationError("grid step must be positive and floor non-negative")
        if self.fractions is not None:
            values = set(float(f) for f in self.fractions)
            if any(f < 0 or f > 1 for f in values):
                raise ConfigurationError("grid fractions must lie in [0, 1]")
            if 0.0 not in values or 1.0 not in values:
                raise ConfigurationError("grid fractions must include 0 and 1")

    def ladder(self) -> np.ndarray:
        if self.fractions is not None:
            return np.array(sorted(set(float(f) for f in self.fractions)))
        steps = int(np.floor(self.floor_db / self.step_db + 1e-9))
        exponents = -self.step_db * np.arange(steps, -1, -1) / 10.0
        return np.concatenate([[0.0], np.power(10.0, exponents)])

    @property
    def size(self) -> int:
        return int(self.ladder().shape[0])

    def levels(self, upper: np.ndarray) -> np.ndarray:
        """Levels for every user: shape ``upper.shape + (size,)``, ascending."""
        return np.asarray(upper, dtype=float)[..., None] * self.ladder()


@dataclass(frozen=True)
class PerToneSolution:
    """All tied maximizers of one per-tone problem and the attained value."""

    optima: Tuple[ToneAllocation, ...]
    value: float
    history: Tuple[float, ...] = field(default=(), compare=False)

    def __post_init__(self) -> None:
        if not self.optima:
            raise SolverError("a per-tone solution needs at least one optimum")

    @property
    def n_ties(self) -> int:
        return len(self.optima)


@dataclass(frozen=True, eq=False)
class ToneProblem:
    """Data of one tone, or of a stack of tones along leading axes.

    With ``a``/``offset`` set the objective is the concave surrogate,
    otherwise the true weighted rate.
    """

    gains_sq: np.ndarray
    noise: np.ndarray
    upper: np.ndarray
    weights: np.ndarray
    constants: PhysicalConstants
    a: Optional[np.ndarray] = None
    offset: Optional[np.ndarray] = None

    @classmethod
    def from_channel(
        cls,
        tone: ToneChannel,
        weights: Sequence[float],
        constants: PhysicalConstants,
        upper: Sequence[float],
    ) -> "ToneProblem":
        return cls(
            tone.gains_sq,
            tone.noise,
            np.asarray(upper, dtype=float),
            np.asarray(weights, dtype=float),
            constants,
        )

    @property
    def n_users(self) -> int:
        return int(self.noise.shape[-1])

    @property
    def is_surrogate(self) -> bool:
        return self.a is not None

    @property
    def gains_mod(self) -> np.ndarray:
        return modified_gains(self.gains_sq, self.constants.snr_gap)

    def _total(self, power: np.ndarray) -> np.ndarray:
        gap = self.constants.snr_gap
        return (self.gains_mod @ power[..., None])[..., 0] + gap * self.noise

    def objective(self, power: np.ndarray) -> np.ndarray:
        """Weighted rate (or surrogate) in bits/s, one value per tone."""
        fs = self.constants.symbol_rate_hz
        if self.a is None:
            bits = bit_loadings(self.gains_sq, self.noise, power, self.constants.snr_gap)
            return fs * (bits @ self.weights)
        assert self.offset is not None
        linear = (self.a @ power[..., None])[..., 0] + self.offset
        return fs * ((np.log2(self._total(power)) - linear) @ self.weights)

    def gradient(self, power: np.ndarray) -> np.ndarray:
        """Gradient of :meth:`objective` with respect to the powers."""
        fs = self.constants.symbol_rate_hz
        gap = self.constants.snr_gap
        w = self.weights
        gain = ((w / (LN2 * self._total(power)))[..., None, :] @ self.gains_mod)[..., 0, :]
        if self.a is None:
            cross = np.where(np.eye(self.n_users, dtype=bool), 0.0, gap * self.gains_sq)
            denom = gap * (interference(self.gains_sq, power) + self.noise)
            cost = ((w / (LN2 * denom))[..., None, :] @ cross)[..., 0, :]
        else:
            cost = (w[..., None, :] @ self.a)[..., 0, :]
        return fs * (gain - cost)

    def lagrangian(self, power: np.ndarray, lam: np.ndarray, prox: ProxConfig) -> np.ndarray:
        value = self.objective(power) - power @ lam
        if prox.c:
            value = value - prox.c * prox_function(power)
        return value

    def default_start(self) -> np.ndarray:
        """Start point used when none is given: every user at its bound."""
        return self.upper.copy()

    def select(self, index: object) -> "ToneProblem":
        """Sub-problem for the tones picked by ``index`` along the first axis."""
        return replace(
            self,
            gains_sq=self.gains_sq[index],
            noise=self.noise[index],
            upper=self.upper[index],
            a=None if self.a is None else self.a[index],
            offset=None if self.offset is None else self.offset[index],
        )


def stacked_problem(scenario: Scenario, approx: Optional[ConvexApprox] = None) -> ToneProblem:
    """All tones of ``scenario`` as one stacked problem."""
    return ToneProblem(
        scenario.gains_sq,
        scenario.noise,
        scenario.upper,
        scenario.weights,
        scenario.constants,
        a=None if approx is None else approx.a,
        offset=None if approx is None else approx.offset,
    )


def tone_problem(
    scenario: Scenario, k: int, approx: Optional[ConvexApprox] = None
) -> ToneProblem:
    """The ``k``-th tone (0-based) of ``scenario`` as a single problem."""
    return stacked_problem(scenario, approx).select(k)


def _check_multipliers(lam: Sequence[float], n_users: int) -> np.ndarray:
    lam = np.asarray(lam, dtype=float)
    if lam.shape != (n_users,):
        raise ValueError(f"expected {n_users} multipliers, got shape {lam.shape}")
    if np.any(lam < 0) or not np.all(np.isfinite(lam)):
        raise ValueError("Lagrange multipliers must be finite and non-negative")
    return lam


def pertone_objective(
    tone: ToneChannel,
    alloc: ToneAllocation,
    weights: Sequence[float],
    constants: PhysicalConstants,
) -> float:
    """``f_s * sum_n w_n b^n`` on one tone."""
    problem = ToneProblem.from_channel(tone, weights, constants, alloc.power)
    return float(problem.objective(alloc.power))


def pertone_lagrangian(
    tone: ToneChannel,
    alloc: ToneAllocation,
    lam: Sequence[float],
    prox: ProxConfig,
    weights: Sequence[float],
    constants: PhysicalConstants,
) -> float:
    """Per-tone Lagrangian without the constant ``sum_n lam_n P^n / K``."""
    lam = _check_multipliers(lam, tone.n_users)
    problem = ToneProblem.from_channel(tone, weights, constants, alloc.power)
    return float(problem.lagrangian(alloc.power, lam, prox))


def pertone_gradient(
    tone: ToneChannel,
    alloc: ToneAllocation,
    weights: Sequence[float],
    constants: PhysicalConstants,
) -> np.ndarray:
    """Gradient of :func:`pertone_objective` with respect to the tone's powers."""
    problem = ToneProblem.from_channel(tone, weights, constants, alloc.power)
    return problem.gradient(alloc.power)


def _grid_combinations(levels: np.ndarray, max_points: int) -> np.ndarray:
    n_users, n_levels = levels.shape
    count = n_levels**n_users
    if count > max_points:
        raise GridSizeError(
            f"Exhaustive search needs {n_levels}^{n_users} = {count} points, "
            f"cap is {max_points}"
        )
    # user 0 varies slowest
    index = np.indices((n_levels,) * n_users).reshape(n_users, -1).T
    return levels[np.arange(n_users)[None, :], index]


def _unique_rows(rows: np.ndarray, atol: float = 0.0) -> np.ndarray:
    """Drop repeated rows, keeping first occurrences in order."""
    kept: List[np.ndarray] = []
    for row in rows:
        if not any(np.allclose(row, other, rtol=0.0, atol=atol) for other in kept):
            kept.append(row)
    return np.array(kept)


def solve_exhaustive(
    problem: ToneProblem,
    lam: Sequence[float],
    prox: ProxConfig,
    grid: PowerGrid,
    tie_rel_tol: float = 1e-3,
    max_points: int = 1_000_000,
) -> PerToneSolution:
    """Enumerate the whole grid of one tone and return every tied optimum.

    Ties are the grid points whose Lagrangian lies within ``tie_rel_tol``
    (relative) of the maximum, listed in enumeration order.
    """
    lam = _check_multipliers(lam, problem.n_users)
    combos = _grid_combinations(grid.levels(problem.upper), max_points)
    values = problem.lagrangian(combos, lam, prox)
    best = float(values.max())
    keep = values >= best - tie_rel_tol * abs(best)
    optima = _unique_rows(combos[keep]) if np.count_nonzero(keep) > 1 else combos[keep]
    return PerToneSolution(tuple(ToneAllocation(row) for row in optima), best)


def _coordinate_descent(
    problem: ToneProblem,
    lam: np.ndarray,
    prox: ProxConfig,
    levels: np.ndarray,
    start: np.ndarray,
    max_sweeps: int = 1000,
) -> Tuple[np.ndarray, List[float]]:
    power = np.array(np.broadcast_to(start, problem.upper.shape), dtype=float)
    value = problem.lagrangian(power, lam, prox)
    history = [float(np.sum(value))]
    for _ in range(max_sweeps):
        moved = False
        for n in range(problem.n_users):
            options = np.moveaxis(levels[..., n, :], -1, 0)
            candidates = np.repeat(power[None], options.shape[0], axis=0)
            candidates[..., n] = options
            values = problem.lagrangian(candidates, lam, prox)
            pick = np.argmax(values, axis=0)
            best = np.take_along_axis(values, np.expand_dims(pick, 0), axis=0)[0]
            better = best > value
            if np.any(better):
                chosen = np.take_along_axis(options, np.expand_dims(pick, 0), axis=0)[0]
                power[..., n] = np.where(better, chosen, power[..., n])
                value = np.where(better, best, value)
                moved = True
            history.append(float(np.sum(value)))
        if not moved:
            break
    return power, history


def solve_coordinate_descent(
    problem: ToneProblem,
    lam: Sequence[float],
    prox: ProxConfig,
    grid: PowerGrid,
    start: ToneAllocation,
) -> PerToneSolution:
    """Cyclic per-user grid maximization from ``start`` until no user improves."""
    lam = _check_multipliers(lam, problem.n_users)
    power, history = _coordinate_descent(
        problem, lam, prox, grid.levels(problem.upper), start.power
    )
    value = float(problem.lagrangian(power, lam, prox))
    return PerToneSolution((ToneAllocation(power),), value, tuple(history))


def _fixed_point_user(
    problem: ToneProblem, power: np.ndarray, lam: np.ndarray, c: float, user: int
) -> np.ndarray:
    """New power of ``user`` given the other powers in ``power``."""
    fs = problem.constants.symbol_rate_hz
    gap = problem.constants.snr_gap
    w = problem.weights
    n = user
    if problem.a is None:
        a, _ = linearization_coefficients(problem.gains_sq, problem.noise, power, gap)
    else:
        a = problem.a
    gains_mod = problem.gains_mod
    ratio = w / (LN2 * problem._total(power))
    benefit = (ratio[..., None, :] @ gains_mod[..., :, n : n + 1])[..., 0, 0]
    benefit = benefit - ratio[..., n] * gains_mod[..., n, n]
    cost = (w[..., None, :] @ a[..., :, n : n + 1])[..., 0, 0]
    penalty = lam[n] + c * power[..., n] + fs * (cost - benefit)
    direct = problem.gains_sq[..., n, n]
    rest = gap * (interference(problem.gains_sq, power)[..., n] + problem.noise[..., n])
    upper = problem.upper[..., n]
    with np.errstate(divide="ignore", invalid="ignore"):
        level = w[n] * fs / (LN2 * penalty) - rest / direct
    # A non-positive penalty leaves the marginal gain positive over the whole box.
    return np.where(penalty > 0, np.clip(level, 0.0, upper), upper)


def fixed_point_update(
    problem: ToneProblem,
    alloc_prev: ToneAllocation,
    lam: Sequence[float],
    prox: ProxConfig,
    user: int,
) -> float:
    """Closed-form KKT update of one user's power with all others frozen.

    Uses the surrogate coefficients when ``problem`` carries them and the
    linearization at ``alloc_prev`` otherwise (direct mode).
    """
    lam = _check_multipliers(lam, problem.n_users)
    return float(_fixed_point_user(problem, alloc_prev.power, lam, prox.c, user))


def _fixed_point_sweeps(
    problem: ToneProblem,
    lam: np.ndarray,
    prox: ProxConfig,
    start: np.ndarray,
    inner_iters: int,
    tol: Optional[float] = None,
) -> np.ndarray:
    shape = np.broadcast_shapes(np.shape(start), problem.upper.shape)
    power = np.array(np.broadcast_to(start, shape), dtype=float)
    scale = float(np.max(problem.upper)) if problem.upper.size else 1.0
    for _ in range(inner_iters):
        previous = power.copy()
        for n in range(problem.n_users):
            power[..., n] = _fixed_point_user(problem, power, lam, prox.c, n)
        if tol is not None and np.max(np.abs(power - previous)) <= tol * scale:
            break
    return power


def solve_fixed_point(
    problem: ToneProblem,
    lam: Sequence[float],
    prox: ProxConfig,
    inner_iters: int = 3,
    start: Optional[ToneAllocation] = None,
    tol: Optional[float] = None,
) -> PerToneSolution:
    """Gauss-Seidel fixed-point sweeps over users, ``inner_iters`` times."""
    lam = _check_multipliers(lam, problem.n_users)
    initial = problem.default_start() if start is None else start.power
    power = _fixed_point_sweeps(problem, lam, prox, initial, inner_iters, tol)
    value = float(problem.lagrangian(power, lam, prox))
    return PerToneSolution((ToneAllocation(power),), value)


def multistart_points(problem: ToneProblem, first: np.ndarray) -> np.ndarray:
    """``first`` followed by one start per user with only that user at the bound."""
    starts = [np.broadcast_to(first, problem.upper.shape)]
    for n in range(problem.n_users):
        one_hot = np.zeros_like(problem.upper)
        one_hot[..., n] = problem.upper[..., n]
        starts.append(one_hot)
    return np.stack(starts)


def solve_multistart(
    problem: ToneProblem,
    lam: Sequence[float],
    prox: ProxConfig,
    inner_iters: int = 3,
    start: Optional[ToneAllocation] = None,
    tol: Optional[float] = None,
    tie_rel_tol: float = 1e-3,
) -> PerToneSolution:
    """Fixed-point runs from several starts on one tone, tied results collected."""
    lam = _check_multipliers(lam, problem.n_users)
    first = problem.default_start() if start is None else start.power
    ties, values = _multistart(problem, lam, prox, first, inner_iters, tol, tie_rel_tol)
    return PerToneSolution(tuple(ToneAllocation(r) for r in ties[0]), float(values[0]))


def _multistart(
    problem: ToneProblem,
    lam: np.ndarray,
    prox: ProxConfig,
    first: np.ndarray,
    inner_iters: int,
    tol: Optional[float],
    tie_rel_tol: float,
) -> Tuple[List[np.ndarray], np.ndarray]:
    starts = multistart_points(problem, first)
    finals = _fixed_point_sweeps(problem, lam, prox, starts, inner_iters, tol)
    values = problem.lagrangian(finals, lam, prox)
    # (S, K, N) and (S, K) with a tone axis even for a single tone
    finals = finals.reshape(finals.shape[0], -1, problem.n_users)
    values = values.reshape(values.shape[0], -1)
    upper = problem.upper.reshape(-1, problem.n_users)
    best = values.max(axis=0)
    keep = values >= best - tie_rel_tol * np.abs(best)
    ties = []
    for k in range(finals.shape[1]):
        atol = 1e-6 * float(np.max(upper[k])) if upper[k].size else 0.0
        ties.append(_unique_rows(finals[keep[:, k], k], atol=atol))
    return ties, best


def solve_box_concave(
    problem: ToneProblem,
    lam: Sequence[float],
    prox: ProxConfig,
    start: Optional[np.ndarray] = None,
    max_iter: int = 20000,
) -> np.ndarray:
    """Maximize the Lagrangian over the box with L-BFGS-B.

    Handles any stack of tones in one call, since the tones are
    separable. Global for the concave surrogate, a local maximum for the
    true objective. Returns the powers with the shape of ``problem.upper``.
    """
    lam = _check_multipliers(lam, problem.n_users)
    upper = problem.upper
    free = upper > 0
    safe_upper = np.where(free, upper, 1.0)
    initial = problem.default_start() if start is None else np.asarray(start, dtype=float)
    z0 = np.where(free, np.clip(initial / safe_upper, 0.0, 1.0), 0.0)
    fs = problem.constants.symbol_rate_hz
    norm = max(fs * float(np.sum(problem.weights)) * max(1, upper.size // problem.n_users), 1e-300)

    def negative_lagrangian(z: np.ndarray) -> Tuple[float, np.ndarray]:
        power = z.reshape(upper.shape) * upper
        value = float(np.sum(problem.lagrangian(power, lam, prox)))
        grad = (problem.gradient(power) - lam - prox.c * power) * upper
        return -value / norm, -grad.ravel() / norm

    result = minimize(
        negative_lagrangian,
        z0.ravel(),
        jac=True,
        method="L-BFGS-B",
        bounds=Bounds(np.zeros(z0.size), free.ravel().astype(float)),
        options={"maxiter": max_iter, "ftol": 1e-15, "gtol": 1e-11, "maxls": 50},
    )
    if not np.all(np.isfinite(result.x)):
        raise SolverError(f"L-BFGS-B produced non-finite powers: {result.message}")
    if not result.success:
        logger.debug(f"L-BFGS-B stopped early: {result.message}")
    return np.clip(result.x.reshape(upper.shape), 0.0, 1.0) * upper


def interleave_index(tone_index: int, n_ties: int) -> int:
    """0-based pick among ``n_ties`` tied optima of a tone with 1-based index."""
    return int(tone_index) % n_ties


@dataclass(frozen=True, eq=False)
class ToneSweep:
    """Per-tone results of one sweep: ties per tone, ordered deterministically."""

    ties: Tuple[np.ndarray, ...]
    values: np.ndarray
    tone_indices: np.ndarray

    @property
    def tie_counts(self) -> np.ndarray:
        return np.array([t.shape[0] for t in self.ties])

    def first(self) -> SpectrumAllocation:
        return SpectrumAllocation(np.stack([t[0] for t in self.ties]))

    def interleaved(self) -> SpectrumAllocation:
        rows = [
            ties[interleave_index(k, ties.shape[0])]
            for k, ties in zip(self.tone_indices, self.ties)
        ]
        return SpectrumAllocation(np.stack(rows))

    def select(self, interleave: bool) -> SpectrumAllocation:
        return self.interleaved() if interleave else self.first()

    def solutions(self) -> List[PerToneSolution]:
        return [
            PerToneSolution(tuple(ToneAllocation(row) for row in ties), float(value))
            for ties, value in zip(self.ties, self.values)
        ]


@dataclass(frozen=True)
class ToneSolver:
    """Per-tone maximizer choice and its parameters, applied to all tones."""

    method: str = "fixedpoint"
    grid: PowerGrid = field(default_factory=PowerGrid)
    tie_rel_tol: float = 1e-3
    inner_iters: int = 3
    tol: Optional[float] = None
    max_grid_points: int = 1_000_000

    def __post_init__(self) -> None:
        if self.method not in PERTONE_METHODS:
            raise ConfigurationError(
                f"Unknown per-tone solver '{self.method}', expected one of {PERTONE_METHODS}"
            )
        if self.inner_iters < 0:
            raise ConfigurationError("inner_iters must be non-negative")
        if self.tie_rel_tol < 0:
            raise ConfigurationError("tie_rel_tol must be non-negative")

    @property
    def reports_ties(self) -> bool:
        return self.method in ("exhaustive", "multistart")

    def sweep(
        self,
        scenario: Scenario,
        lam: Sequence[float],
        prox: ProxConfig,
        approx: Optional[ConvexApprox] = None,
        warm: Optional[SpectrumAllocation] = None,
    ) -> ToneSweep:
        """Solve every tone of ``scenario`` at multipliers ``lam``."""
        lam = _check_multipliers(lam, scenario.n_users)
        problem = stacked_problem(scenario, approx)
        start = scenario.flat_allocation().power if warm is None else warm.power

        if self.method == "exhaustive":
            ties = []
            values = np.empty(scenario.n_tones)
            for k in range(scenario.n_tones):
                solution = solve_exhaustive(
                    problem.select(k),
                    lam,
                    prox,
                    self.grid,
                    self.tie_rel_tol,
                    self.max_grid_points,
                )
                ties.append(np.stack([o.power for o in solution.optima]))
                values[k] = solution.value
            return self._result(ties, values, scenario)

        if self.method == "multistart":
            ties, values = _multistart(
                problem, lam, prox, start, self.inner_iters, self.tol, self.tie_rel_tol
            )
            return self._result(ties, values, scenario)

        if self.method == "isb":
            power, _ = _coordinate_descent(
                problem, lam, prox, self.grid.levels(problem.upper), start
            )
        elif self.method == "fixedpoint":
            power = _fixed_point_sweeps(problem, lam, prox, start, self.inner_iters, self.tol)
        else:
            power = solve_box_concave(problem, lam, prox, start)
        values = problem.lagrangian(power, lam, prox)
        return self._result(list(power[:, None, :]), values, scenario)

    @staticmethod
    def _result(
        ties: Sequence[np.ndarray], values: np.ndarray, scenario: Scenario
    ) -> ToneSweep:
        assert scenario.tone_indices is not None
        return ToneSweep(tuple(ties), np.asarray(values, dtype=float), scenario.tone_indices)
