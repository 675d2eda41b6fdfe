"""
Problem-instance representation for multi-user DSL spectrum balancing.

Holds the physical constants, per-tone channels, budgets and masks of a
scenario, together with the bit-loading, rate and power evaluations every
solver builds on. All quantities are linear (mW, power ratios).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

from .exceptions import ScenarioValidationError
from .units import db_to_linear, linear_to_db

LN2 = math.log(2.0)

# Budgets used by the reference DSL scenarios.
VDSL_BUDGET_DBM = 11.5
ADSL_BUDGET_DBM = 20.4


def _frozen_array(values: object, name: str, ndim: int) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.ndim != ndim:
        raise ScenarioValidationError(
            f"{name} must be {ndim}-dimensional, got shape {arr.shape}"
        )
    if not np.all(np.isfinite(arr)):
        raise ScenarioValidationError(f"{name} contains non-finite values")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class PhysicalConstants:
    """SNR gap, tone spacing and DMT symbol rate."""

    snr_gap: float
    tone_spacing_hz: float
    symbol_rate_hz: float

    def __post_init__(self) -> None:
        for name in ("snr_gap", "tone_spacing_hz", "symbol_rate_hz"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise ScenarioValidationError(f"{name} must be strictly positive")
        if self.snr_gap < 1.0:
            raise ScenarioValidationError(
                f"snr_gap must be >= 1 (0 dB), got {self.snr_gap}"
            )

    @classmethod
    def from_db(
        cls,
        gamma_db: float,
        tone_spacing_hz: float = 4312.5,
        symbol_rate_hz: float = 4000.0,
    ) -> "PhysicalConstants":
        return cls(float(db_to_linear(gamma_db)), tone_spacing_hz, symbol_rate_hz)

    @property
    def gamma_db(self) -> float:
        return float(linear_to_db(self.snr_gap))


DSL_CONSTANTS = PhysicalConstants.from_db(12.9, 4312.5, 4000.0)
UNIT_CONSTANTS = PhysicalConstants(1.0, 1.0, 1.0)


@dataclass(frozen=True, eq=False)
class ToneChannel:
    """Squared channel magnitudes and noise powers on a single tone.

    ``gains_sq[n, m]`` is the gain from transmitter ``m`` into receiver ``n``.
    """

    gains_sq: np.ndarray
    noise: np.ndarray

    def __post_init__(self) -> None:
        gains = _frozen_array(self.gains_sq, "gains_sq", 2)
        noise = _frozen_array(self.noise, "noise", 1)
        _check_channel(gains[None], noise[None])
        object.__setattr__(self, "gains_sq", gains)
        object.__setattr__(self, "noise", noise)

    @property
    def n_users(self) -> int:
        return int(self.noise.shape[0])


def _check_channel(gains: np.ndarray, noise: np.ndarray) -> None:
    n_users = noise.shape[-1]
    if gains.shape[-2:] != (n_users, n_users):
        raise ScenarioValidationError(
            f"gains_sq must be {n_users}x{n_users} per tone, got {gains.shape[-2:]}"
        )
    if gains.shape[:-2] != noise.shape[:-1]:
        raise ScenarioValidationError(
            f"gains_sq covers {gains.shape[:-2]} tones but noise covers {noise.shape[:-1]}"
        )
    if np.any(gains < 0):
        raise ScenarioValidationError("gains_sq entries must be non-negative")
    if np.any(np.diagonal(gains, axis1=-2, axis2=-1) <= 0):
        raise ScenarioValidationError("direct channel gains must be strictly positive")
    if np.any(noise <= 0):
        raise ScenarioValidationError("noise powers must be strictly positive")


@dataclass(frozen=True, eq=False)
class ToneAllocation:
    """Transmit powers of all users on one tone (mW)."""

    power: np.ndarray

    def __post_init__(self) -> None:
        power = _frozen_array(self.power, "power", 1)
        if np.any(power < 0):
            raise ScenarioValidationError("transmit powers must be non-negative")
        object.__setattr__(self, "power", power)

    @property
    def n_users(self) -> int:
        return int(self.power.shape[0])


@dataclass(frozen=True, eq=False)
class SpectrumAllocation:
    """Transmit spectra of all users: ``power[k, n]`` in mW."""

    power: np.ndarray

    def __post_init__(self) -> None:
        power = _frozen_array(self.power, "power", 2)
        if np.any(power < 0):
            raise ScenarioValidationError("transmit powers must be non-negative")
        object.__setattr__(self, "power", power)

    @classmethod
    def from_tones(cls, tones: Sequence[ToneAllocation]) -> "SpectrumAllocation":
        if not tones:
            raise ScenarioValidationError("an allocation needs at least one tone")
        return cls(np.stack([t.power for t in tones]))

    @classmethod
    def zeros(cls, n_tones: int, n_users: int) -> "SpectrumAllocation":
        return cls(np.zeros((n_tones, n_users)))

    @property
    def n_tones(self) -> int:
        return int(self.power.shape[0])

    @property
    def n_users(self) -> int:
        return int(self.power.shape[1])

    @property
    def tones(self) -> Tuple[ToneAllocation, ...]:
        return tuple(ToneAllocation(row) for row in self.power)

    @property
    def total_power(self) -> np.ndarray:
        """Per-user total power ``P^n = sum_k s_k^n``."""
        return self.power.sum(axis=0)

    def within_box(self, scenario: "Scenario", rtol: float = 1e-12) -> bool:
        upper = scenario.upper
        return bool(
            self.power.shape == upper.shape
            and np.all(self.power >= 0)
            and np.all(self.power <= upper * (1 + rtol))
        )


@dataclass(frozen=True, eq=False)
class Scenario:
    """A complete spectrum-balancing problem instance.

    Arrays are stored stacked over tones: ``gains_sq`` is K x N x N,
    ``noise`` and ``mask`` are K x N. Use :meth:`from_tones` to build one
    from a list of :class:`ToneChannel` records.
    """

    gains_sq: np.ndarray
    noise: np.ndarray
    weights: np.ndarray
    power_budget: np.ndarray
    mask: Optional[np.ndarray] = None
    constants: PhysicalConstants = DSL_CONSTANTS
    name: str = ""
    tone_indices: Optional[np.ndarray] = None
    _tones: Tuple[ToneChannel, ...] = field(default=(), init=False, repr=False)

    def __post_init__(self) -> None:
        gains = _frozen_array(self.gains_sq, "gains_sq", 3)
        noise = _frozen_array(self.noise, "noise", 2)
        weights = _frozen_array(self.weights, "weights", 1)
        budget = _frozen_array(self.power_budget, "power_budget", 1)
        _check_channel(gains, noise)
        n_tones, n_users = noise.shape
        if n_tones == 0 or n_users == 0:
            raise ScenarioValidationError("a scenario needs at least one user and tone")
        if weights.shape != (n_users,) or budget.shape != (n_users,):
            raise ScenarioValidationError(
                f"weights and power_budget must have length {n_users}"
            )
        if np.any(weights < 0):
            raise ScenarioValidationError("weights must be non-negative")
        if np.any(budget <= 0):
            raise ScenarioValidationError("power budgets must be strictly positive")
        if self.mask is None:
            mask = np.broadcast_to(budget, (n_tones, n_users)).copy()
            mask.setflags(write=False)
        else:
            mask = _frozen_array(self.mask, "mask", 2)
        if mask.shape != (n_tones, n_users):
            raise ScenarioValidationError(
                f"mask must be {n_tones}x{n_users}, got {mask.shape}"
            )
        if np.any(mask < 0):
            raise ScenarioValidationError("mask entries must be non-negative")
        if self.tone_indices is None:
            indices = np.arange(1, n_tones + 1)
        else:
            indices = np.array(self.tone_indices, dtype=int)
        if indices.shape != (n_tones,):
            raise ScenarioValidationError(f"tone_indices must have length {n_tones}")
        indices.setflags(write=False)

        object.__setattr__(self, "gains_sq", gains)
        object.__setattr__(self, "noise", noise)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "power_budget", budget)
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "tone_indices", indices)
        object.__setattr__(
            self, "_tones", tuple(ToneChannel(g, s) for g, s in zip(gains, noise))
        )

    @classmethod
    def from_tones(
        cls,
        tones: Sequence[ToneChannel],
        weights: Sequence[float],
        power_budget: Sequence[float],
        mask: Optional[np.ndarray] = None,
        constants: PhysicalConstants = DSL_CONSTANTS,
        name: str = "",
        tone_indices: Optional[Sequence[int]] = None,
    ) -> "Scenario":
        if not tones:
            raise ScenarioValidationError("a scenario needs at least one tone")
        sizes = {t.n_users for t in tones}
        if len(sizes) != 1:
            raise ScenarioValidationError(f"tones disagree on user count: {sorted(sizes)}")
        return cls(
            gains_sq=np.stack([t.gains_sq for t in tones]),
            noise=np.stack([t.noise for t in tones]),
            weights=np.asarray(weights, dtype=float),
            power_budget=np.asarray(power_budget, dtype=float),
            mask=mask,
            constants=constants,
            name=name,
            tone_indices=None if tone_indices is None else np.asarray(tone_indices),
        )

    @property
    def n_users(self) -> int:
        return int(self.noise.shape[1])

    @property
    def n_tones(self) -> int:
        return int(self.noise.shape[0])

    @property
    def tones(self) -> Tuple[ToneChannel, ...]:
        return self._tones

    def tone(self, k: int) -> ToneChannel:
        """Channel of the ``k``-th tone (0-based position)."""
        return self._tones[k]

    @property
    def upper(self) -> np.ndarray:
        """Box bound ``min(mask, budget)`` per tone and user."""
        assert self.mask is not None
        return np.minimum(self.mask, self.power_budget[None, :])

    def flat_allocation(self) -> SpectrumAllocation:
        """Budget spread evenly over the tones, clipped to the mask."""
        assert self.mask is not None
        flat = np.minimum(self.mask, self.power_budget[None, :] / self.n_tones)
        return SpectrumAllocation(flat)

    def with_budget(self, power_budget: Sequence[float]) -> "Scenario":
        return Scenario(
            gains_sq=self.gains_sq,
            noise=self.noise,
            weights=self.weights,
            power_budget=np.asarray(power_budget, dtype=float),
            mask=self.mask,
            constants=self.constants,
            name=self.name,
            tone_indices=self.tone_indices,
        )


def modified_gains(gains_sq: np.ndarray, snr_gap: float) -> np.ndarray:
    """Gains with the SNR gap folded into the crosstalk terms.

    Diagonal entries are the direct gains, off-diagonal entries are scaled
    by ``snr_gap``. Works on any stack of N x N matrices.
    """
    n = gains_sq.shape[-1]
    eye = np.eye(n, dtype=bool)
    return np.where(eye, gains_sq, snr_gap * gains_sq)


def crosstalk_gains(gains_sq: np.ndarray) -> np.ndarray:
    """Copy of ``gains_sq`` with the diagonal zeroed."""
    n = gains_sq.shape[-1]
    return np.where(np.eye(n, dtype=bool), 0.0, gains_sq)


def interference(gains_sq: np.ndarray, power: np.ndarray) -> np.ndarray:
    """Received crosstalk power per user; broadcasts over leading axes."""
    return (crosstalk_gains(gains_sq) @ power[..., None])[..., 0]


def bit_loadings(
    gains_sq: np.ndarray, noise: np.ndarray, power: np.ndarray, snr_gap: float
) -> np.ndarray:
    """Bits per symbol of every user, vectorized over leading axes.

    ``b^n = log2(1 + g^nn s^n / (snr_gap * (sum_{m!=n} g^nm s^m + noise^n)))``
    """
    direct = np.diagonal(gains_sq, axis1=-2, axis2=-1)
    sinr = direct * power / (snr_gap * (interference(gains_sq, power) + noise))
    return np.log1p(sinr) / LN2


def bit_loading(
    tone: ToneChannel, alloc: ToneAllocation, user: int, constants: PhysicalConstants
) -> float:
    """Bits/Hz of ``user`` on ``tone`` under ``alloc``."""
    if alloc.n_users != tone.n_users:
        raise ScenarioValidationError(
            f"allocation has {alloc.n_users} users, tone has {tone.n_users}"
        )
    if not 0 <= user < tone.n_users:
        raise IndexError(f"user {user} out of range for {tone.n_users} users")
    bits = bit_loadings(tone.gains_sq, tone.noise, alloc.power, constants.snr_gap)
    return float(bits[user])


def _check_allocation(scenario: Scenario, alloc: SpectrumAllocation) -> None:
    if alloc.power.shape != (scenario.n_tones, scenario.n_users):
        raise ScenarioValidationError(
            f"allocation shape {alloc.power.shape} does not match scenario "
            f"({scenario.n_tones}, {scenario.n_users})"
        )


def user_rates(scenario: Scenario, alloc: SpectrumAllocation) -> np.ndarray:
    """Data rate of every user in bits/s."""
    _check_allocation(scenario, alloc)
    bits = bit_loadings(
        scenario.gains_sq, scenario.noise, alloc.power, scenario.constants.snr_gap
    )
    return scenario.constants.symbol_rate_hz * bits.sum(axis=0)


def user_rate(scenario: Scenario, alloc: SpectrumAllocation, user: int) -> float:
    return float(user_rates(scenario, alloc)[user])


def weighted_rate_sum(scenario: Scenario, alloc: SpectrumAllocation) -> float:
    return float(scenario.weights @ user_rates(scenario, alloc))


def objective_scale(scenario: Scenario) -> float:
    """Weighted rate sum of the flat allocation.

    Relative tolerances and stepsizes are expressed against this value.
    Falls back to 1 for degenerate scenarios with a zero objective.
    """
    value = weighted_rate_sum(scenario, scenario.flat_allocation())
    return value if value > 0 else 1.0
