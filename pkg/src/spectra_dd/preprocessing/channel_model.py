"""
Synthetic DSL channel generation.

``synth_scenario`` expands a :class:`ChannelModelSpec` into a
:class:`Scenario` using a parametric cable model; ``random_scenario``
draws small seeded instances for property and convergence tests.
"""

import logging
from typing import Optional

import numpy as np

from ..core.exceptions import ScenarioValidationError
from ..core.model import PhysicalConstants, Scenario
from ..core.units import dbm_to_mw, psd_to_tone_power
from .schema import ChannelModelSpec

logger = logging.getLogger(__name__)


def insertion_gain(length_m: np.ndarray, freq_mhz: np.ndarray, k_a: float) -> np.ndarray:
    """Power gain of a line: ``10^(-k_a * L * sqrt(f) / 10)``."""
    return np.power(10.0, -k_a * np.asarray(length_m) * np.sqrt(freq_mhz) / 10.0)


def band_plan(spec: ChannelModelSpec) -> np.ndarray:
    """Used tone indices, ascending, after applying the stride."""
    if spec.tone_indices is not None:
        indices = np.unique(np.asarray(spec.tone_indices, dtype=int))
    else:
        assert spec.bands is not None
        parts = [np.arange(first, last + 1) for first, last in spec.bands]
        indices = np.unique(np.concatenate(parts)) if parts else np.array([], dtype=int)
    indices = indices[:: spec.tone_stride]
    if indices.size == 0:
        raise ScenarioValidationError("band plan selects no tones")
    if np.any(indices < 0):
        raise ScenarioValidationError("tone indices must be non-negative")
    return indices


def _pair_matrix(values: Optional[list], default: np.ndarray, name: str) -> np.ndarray:
    if values is None:
        return default
    matrix = np.asarray(values, dtype=float)
    if matrix.shape != default.shape:
        raise ScenarioValidationError(f"{name} must be {default.shape[0]}x{default.shape[1]}")
    if np.any(matrix < 0):
        raise ScenarioValidationError(f"{name} must be non-negative")
    return matrix


def synth_scenario(spec: ChannelModelSpec) -> Scenario:
    """Build a scenario from the parametric cable model in ``spec``."""
    lengths = np.asarray(spec.lengths_m, dtype=float)
    if np.any(lengths <= 0):
        raise ScenarioValidationError("line lengths must be strictly positive")
    n_users = lengths.size
    indices = band_plan(spec)
    freq_mhz = indices * spec.tone_spacing_hz / 1e6

    coupling = _pair_matrix(
        spec.coupling_lengths_m,
        np.minimum(lengths[:, None], lengths[None, :]),
        "coupling_lengths_m",
    )
    path = _pair_matrix(
        spec.fext_path_lengths_m,
        np.repeat(lengths[:, None], n_users, axis=1),
        "fext_path_lengths_m",
    )
    k_a = spec.attenuation_db_per_m_sqrt_mhz
    f = freq_mhz[:, None, None]
    gains = spec.fext_coupling * coupling * f**2 * insertion_gain(path, f, k_a)
    direct = insertion_gain(lengths[None, :], freq_mhz[:, None], k_a)
    diag = np.arange(n_users)
    gains[:, diag, diag] = direct

    n_tones = indices.size
    noise = np.full((n_tones, n_users), psd_to_tone_power(spec.noise_dbm_hz, spec.tone_spacing_hz))
    budget = np.broadcast_to(np.asarray(dbm_to_mw(spec.budget_dbm), dtype=float), (n_users,))
    if spec.tone_stride > 1:
        full = band_plan(spec.model_copy(update={"tone_stride": 1})).size
        budget = budget * (n_tones / full)
    mask = None
    if spec.mask_dbm_hz is not None:
        mask = np.full(
            (n_tones, n_users), psd_to_tone_power(spec.mask_dbm_hz, spec.tone_spacing_hz)
        )
    weights = (
        np.full(n_users, 1.0 / n_users) if spec.weights is None else np.asarray(spec.weights)
    )
    constants = PhysicalConstants.from_db(
        spec.gamma_db, spec.tone_spacing_hz, spec.symbol_rate_hz
    )
    logger.info(f"📊 Synthesized '{spec.name}': {n_users} users, {n_tones} tones")
    return Scenario(
        gains_sq=gains,
        noise=noise,
        weights=weights,
        power_budget=np.array(budget),
        mask=mask,
        constants=constants,
        name=spec.name,
        tone_indices=indices,
    )


def random_scenario(
    n_users: int,
    n_tones: int,
    seed: int = 0,
    crosstalk: float = 0.01,
    noise_level: float = 1e-4,
    mask_level: float = 0.01,
    budget_fraction: float = 0.6,
    constants: Optional[PhysicalConstants] = None,
) -> Scenario:
    """Seeded random instance with unit constants.

    Direct gains are drawn around 1, crosstalk around ``crosstalk`` and
    noise around ``noise_level``. Every user's budget is
    ``budget_fraction`` of its total mask power, so budgets bind when
    ``budget_fraction < 1``.
    """
    if n_users < 1 or n_tones < 1:
        raise ScenarioValidationError("need at least one user and one tone")
    rng = np.random.default_rng(seed)
    gains = crosstalk * rng.uniform(0.0, 1.0, size=(n_tones, n_users, n_users))
    diag = np.arange(n_users)
    gains[:, diag, diag] = rng.uniform(0.5, 1.5, size=(n_tones, n_users))
    noise = noise_level * rng.uniform(0.5, 1.5, size=(n_tones, n_users))
    mask = np.full((n_tones, n_users), mask_level)
    budget = np.full(n_users, budget_fraction * n_tones * mask_level)
    return Scenario(
        gains_sq=gains,
        noise=noise,
        weights=np.full(n_users, 1.0 / n_users),
        power_budget=budget,
        mask=mask,
        constants=constants or PhysicalConstants(1.0, 1.0, 1.0),
        name=f"random-{n_users}x{n_tones}-seed{seed}",
    )
