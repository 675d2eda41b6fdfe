"""
Concave surrogate of the per-tone weighted rate.

Each user's rate is written as ``log2(T_n(s)) - log2(U_n(s))`` with
``T_n = sum_m gmod[n, m] s^m + gap * noise_n`` (the modified gains) and
``U_n = gap * (crosstalk_n + noise_n)``. The convex part ``log2(U_n)`` is
replaced by its tangent at an expansion point, which gives a concave
global lower bound that is tight at that point.

Array convention: ``a[k, n, m]`` multiplies ``s_k^m`` inside user ``n``'s
term; its diagonal is zero.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Tuple, Union

import numpy as np

from .model import (
    LN2,
    Scenario,
    SpectrumAllocation,
    ToneAllocation,
    crosstalk_gains,
    interference,
    modified_gains,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ConvexApprox:
    """Approximation parameters for every tone of a scenario."""

    a: np.ndarray
    offset: np.ndarray
    gains_mod: np.ndarray
    expansion_point: SpectrumAllocation
    scenario: Scenario

    @property
    def n_tones(self) -> int:
        return int(self.offset.shape[0])


def linearization_coefficients(
    gains_sq: np.ndarray, noise: np.ndarray, power: np.ndarray, snr_gap: float
) -> Tuple[np.ndarray, np.ndarray]:
    """Tangent of ``log2(U_n)`` at ``power``.

    Returns ``(a, offset)`` such that
    ``log2(U_n(s)) <= sum_m a[n, m] s^m + offset[n]`` with equality at
    ``s = power``. Broadcasts over leading axes.
    """
    denom = snr_gap * (interference(gains_sq, power) + noise)
    a = snr_gap * crosstalk_gains(gains_sq) / (LN2 * denom[..., :, None])
    offset = np.log2(denom) - (a @ power[..., None])[..., 0]
    return a, offset


def build_approx(scenario: Scenario, expansion_point: SpectrumAllocation) -> ConvexApprox:
    """Build the surrogate for all tones, tight at ``expansion_point``."""
    if not expansion_point.within_box(scenario):
        logger.warning("⚠️ Expansion point lies outside the power box")
    a, offset = linearization_coefficients(
        scenario.gains_sq,
        scenario.noise,
        expansion_point.power,
        scenario.constants.snr_gap,
    )
    gains_mod = modified_gains(scenario.gains_sq, scenario.constants.snr_gap)
    return ConvexApprox(a, offset, gains_mod, expansion_point, scenario)


def _received(approx: ConvexApprox, k: Union[int, slice], power: np.ndarray) -> np.ndarray:
    gap = approx.scenario.constants.snr_gap
    return (approx.gains_mod[k] @ power[..., None])[..., 0] + gap * approx.scenario.noise[k]


def surrogate_values(approx: ConvexApprox, power: np.ndarray) -> np.ndarray:
    """Surrogate objective of every tone; ``power`` has shape (..., K, N)."""
    sc = approx.scenario
    total = _received(approx, slice(None), power)
    penalty = (approx.a @ power[..., None])[..., 0] + approx.offset
    per_user = np.log2(total) - penalty
    return sc.constants.symbol_rate_hz * (per_user @ sc.weights)


def surrogate_objective(approx: ConvexApprox, tone_index: int, alloc: ToneAllocation) -> float:
    """Surrogate of the weighted rate on one tone (bits/s)."""
    sc = approx.scenario
    s = alloc.power
    total = _received(approx, tone_index, s)
    per_user = np.log2(total) - (approx.a[tone_index] @ s + approx.offset[tone_index])
    return float(sc.constants.symbol_rate_hz * (sc.weights @ per_user))


def surrogate_gradient(
    approx: ConvexApprox, tone_index: int, alloc: ToneAllocation
) -> np.ndarray:
    """Analytic gradient of :func:`surrogate_objective` with respect to the powers."""
    sc = approx.scenario
    s = alloc.power
    total = _received(approx, tone_index, s)
    w = sc.weights
    grad = (w / (LN2 * total)) @ approx.gains_mod[tone_index] - w @ approx.a[tone_index]
    return sc.constants.symbol_rate_hz * grad


def approx_to_dict(approx: ConvexApprox) -> Dict[str, Any]:
    return {
        "scenario": approx.scenario.name,
        "tone_indices": approx.scenario.tone_indices.tolist(),
        "a": approx.a.tolist(),
        "offset": approx.offset.tolist(),
        "gains_mod": approx.gains_mod.tolist(),
        "expansion_point": approx.expansion_point.power.tolist(),
    }


def dump_approx(path: Union[str, Path], approx: ConvexApprox) -> Path:
    """Write the approximation parameters as JSON for inspection."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(approx_to_dict(approx), f, indent=2)
    logger.info(f"💾 Wrote convex approximation to {path}")
    return path
