"""
Document models for scenario files and the synthetic channel model.

Scenario files are JSON or YAML. They either list every tone explicitly
(gains in dB, noise and mask in dBm/Hz) or carry a ``synthetic`` block that
is expanded by :func:`spectra_dd.preprocessing.channel_model.synth_scenario`.
"""

import json
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import yaml
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

from ..core.exceptions import ScenarioValidationError


def format_validation_error(error: ValidationError) -> str:
    """One ``dotted.field.path: message`` line per pydantic error."""
    lines = []
    for item in error.errors():
        location = ".".join(str(part) for part in item["loc"]) or "<root>"
        lines.append(f"  {location}: {item['msg']}")
    return "\n".join(lines)


def read_document(path: Union[str, Path]) -> Dict[str, Any]:
    """Load a JSON or YAML mapping; the suffix picks the parser."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"File not found: {path}")
    with open(path, "r", encoding="utf-8") as f:
        if path.suffix.lower() in (".yml", ".yaml"):
            data = yaml.safe_load(f)
        else:
            data = json.load(f)
    if not isinstance(data, dict):
        raise ScenarioValidationError(f"{path}: top level must be a mapping")
    return data


class ConstantsDocument(BaseModel):
    model_config = ConfigDict(extra="forbid")

    gamma_db: NonNegativeFloat = 12.9
    tone_spacing_hz: PositiveFloat = 4312.5
    symbol_rate_hz: PositiveFloat = 4000.0


class UserDocument(BaseModel):
    model_config = ConfigDict(extra="forbid")

    budget_dbm: float
    weight: NonNegativeFloat = 1.0


class ToneDocument(BaseModel):
    model_config = ConfigDict(extra="forbid")

    tone_index: Optional[int] = None
    gains_sq_db: List[List[float]]
    noise_dbm_hz: List[float]
    mask_dbm_hz: Optional[List[float]] = None


class ChannelModelSpec(BaseModel):
    """Parameters of the synthetic cable-bundle model.

    Direct gain ``10^(-k_a L_n sqrt(f/MHz) / 10)``; crosstalk from ``m``
    into ``n`` is ``k_x * Lc[n,m] * (f/MHz)^2 * 10^(-k_a Lp[n,m] sqrt(f/MHz) / 10)``
    with coupling length ``Lc`` (default ``min(L_n, L_m)``) and attenuation
    path ``Lp`` (default ``L_n``).

    A ``tone_stride`` above 1 keeps every stride-th tone and scales the
    budgets by the kept fraction, so thinned scenarios bind like full ones.
    """

    model_config = ConfigDict(extra="forbid")

    lengths_m: List[float] = Field(min_length=1)
    coupling_lengths_m: Optional[List[List[float]]] = None
    fext_path_lengths_m: Optional[List[List[float]]] = None
    tone_indices: Optional[List[int]] = None
    bands: Optional[List[Tuple[int, int]]] = None
    tone_stride: PositiveInt = 1
    attenuation_db_per_m_sqrt_mhz: NonNegativeFloat = 0.02
    fext_coupling: NonNegativeFloat = 1e-7
    noise_dbm_hz: float = -140.0
    mask_dbm_hz: Optional[float] = None
    budget_dbm: Union[float, List[float]] = 11.5
    weights: Optional[List[NonNegativeFloat]] = None
    gamma_db: NonNegativeFloat = 12.9
    tone_spacing_hz: PositiveFloat = 4312.5
    symbol_rate_hz: PositiveFloat = 4000.0
    name: str = "synthetic"

    @model_validator(mode="after")
    def _check_band_plan(self) -> "ChannelModelSpec":
        if (self.tone_indices is None) == (self.bands is None):
            raise ValueError("give exactly one of 'tone_indices' or 'bands'")
        for first, last in self.bands or []:
            if first > last:
                raise ValueError(f"band [{first}, {last}] is reversed")
        return self


class ScenarioDocument(BaseModel):
    """Top-level scenario file."""

    model_config = ConfigDict(extra="forbid")

    name: str = ""
    constants: ConstantsDocument = Field(default_factory=ConstantsDocument)
    users: Optional[List[UserDocument]] = None
    tones: Optional[List[ToneDocument]] = None
    synthetic: Optional[ChannelModelSpec] = None

    @model_validator(mode="after")
    def _check_shape(self) -> "ScenarioDocument":
        if (self.tones is None) == (self.synthetic is None):
            raise ValueError("give exactly one of 'tones' or 'synthetic'")
        if self.synthetic is not None:
            if self.users is not None:
                raise ValueError(
                    "'users' belong inside the 'synthetic' block (budget_dbm, weights)"
                )
            if "constants" in self.model_fields_set:
                raise ValueError("'constants' belong inside the 'synthetic' block")
        if self.tones is not None:
            if not self.users:
                raise ValueError("'users' is required when tones are listed")
            if not self.tones:
                raise ValueError("'tones' must not be empty")
            n = len(self.users)
            for k, tone in enumerate(self.tones):
                if len(tone.gains_sq_db) != n or any(len(row) != n for row in tone.gains_sq_db):
                    raise ValueError(f"tones[{k}].gains_sq_db must be {n}x{n}")
                if len(tone.noise_dbm_hz) != n:
                    raise ValueError(f"tones[{k}].noise_dbm_hz must have {n} entries")
                if tone.mask_dbm_hz is not None and len(tone.mask_dbm_hz) != n:
                    raise ValueError(f"tones[{k}].mask_dbm_hz must have {n} entries")
        return self
