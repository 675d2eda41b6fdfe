"""
Scenario files, spectra and trace CSVs.

Scenario documents round-trip exactly at the document level (JSON ->
document -> JSON). Converting to a :class:`Scenario` goes through dB, so a
scenario -> document -> scenario round trip is exact to floating-point
rounding of the dB conversions; zero gains and powers are written at
``ZERO_DB`` and come back as exact zeros.
"""

import csv
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Union

import numpy as np
from pydantic import ValidationError

from ..core.exceptions import ScenarioValidationError
from ..core.model import PhysicalConstants, Scenario, SpectrumAllocation
from ..core.units import (
    dbm_to_mw,
    finite_db_to_linear,
    linear_to_finite_db,
    mw_to_dbm,
    psd_to_tone_power,
    tone_power_to_psd,
)
from .channel_model import synth_scenario
from .schema import (
    ConstantsDocument,
    ScenarioDocument,
    ToneDocument,
    UserDocument,
    format_validation_error,
    read_document,
)

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def load_document(path: PathLike) -> ScenarioDocument:
    """Parse and validate a scenario file without building the scenario."""
    data = read_document(path)
    try:
        return ScenarioDocument.model_validate(data)
    except ValidationError as e:
        raise ScenarioValidationError(
            f"Invalid scenario file {path}:\n{format_validation_error(e)}"
        ) from e


def _psd_power(psd_dbm_hz: List[float], spacing: float) -> np.ndarray:
    return np.asarray(finite_db_to_linear(np.array(psd_dbm_hz))) * spacing


def scenario_from_document(document: ScenarioDocument) -> Scenario:
    if document.synthetic is not None:
        spec = document.synthetic
        if document.name:
            spec = spec.model_copy(update={"name": document.name})
        return synth_scenario(spec)

    assert document.users is not None and document.tones is not None
    constants_doc = document.constants
    constants = PhysicalConstants.from_db(
        constants_doc.gamma_db, constants_doc.tone_spacing_hz, constants_doc.symbol_rate_hz
    )
    spacing = constants.tone_spacing_hz
    gains = np.array([finite_db_to_linear(np.array(t.gains_sq_db)) for t in document.tones])
    noise = np.array([_psd_power(t.noise_dbm_hz, spacing) for t in document.tones])
    budget = np.array([dbm_to_mw(u.budget_dbm) for u in document.users])
    mask = None
    if any(t.mask_dbm_hz is not None for t in document.tones):
        mask = np.array(
            [
                budget if t.mask_dbm_hz is None else _psd_power(t.mask_dbm_hz, spacing)
                for t in document.tones
            ]
        )
    indices = None
    if all(t.tone_index is not None for t in document.tones):
        indices = np.array([t.tone_index for t in document.tones])
    return Scenario(
        gains_sq=gains,
        noise=noise,
        weights=np.array([u.weight for u in document.users]),
        power_budget=budget,
        mask=mask,
        constants=constants,
        name=document.name,
        tone_indices=indices,
    )


def load_scenario(path: PathLike) -> Scenario:
    """Load a scenario from a JSON or YAML file."""
    scenario = scenario_from_document(load_document(path))
    logger.info(
        f"📂 Loaded scenario '{scenario.name}' from {path}: "
        f"{scenario.n_users} users, {scenario.n_tones} tones"
    )
    return scenario


def scenario_to_document(scenario: Scenario) -> ScenarioDocument:
    constants = scenario.constants
    spacing = constants.tone_spacing_hz
    assert scenario.mask is not None and scenario.tone_indices is not None
    tones = [
        ToneDocument(
            tone_index=int(index),
            gains_sq_db=np.asarray(linear_to_finite_db(gains)).tolist(),
            noise_dbm_hz=np.asarray(linear_to_finite_db(noise / spacing)).tolist(),
            mask_dbm_hz=np.asarray(linear_to_finite_db(mask / spacing)).tolist(),
        )
        for index, gains, noise, mask in zip(
            scenario.tone_indices, scenario.gains_sq, scenario.noise, scenario.mask
        )
    ]
    users = [
        UserDocument(budget_dbm=float(mw_to_dbm(budget)), weight=float(weight))
        for budget, weight in zip(scenario.power_budget, scenario.weights)
    ]
    return ScenarioDocument(
        name=scenario.name,
        constants=ConstantsDocument(
            gamma_db=constants.gamma_db,
            tone_spacing_hz=constants.tone_spacing_hz,
            symbol_rate_hz=constants.symbol_rate_hz,
        ),
        users=users,
        tones=tones,
    )


def save_document(path: PathLike, document: ScenarioDocument) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        data = document.model_dump(mode="python", exclude_none=True)
        json.dump(data, f, indent=2, allow_nan=False)
    return path


def save_scenario(path: PathLike, scenario: Scenario) -> Path:
    """Write ``scenario`` as an explicit-tone JSON document."""
    path = save_document(path, scenario_to_document(scenario))
    logger.info(f"💾 Saved scenario '{scenario.name}' to {path}")
    return path


def _format(value: float) -> str:
    return repr(float(value))


def save_allocation(
    path: PathLike,
    scenario: Scenario,
    allocation: SpectrumAllocation,
) -> Path:
    """Write spectra as dBm/Hz per tone; zero powers are written as ``-inf``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    psd = np.asarray(tone_power_to_psd(allocation.power, scenario.constants.tone_spacing_hz))
    assert scenario.tone_indices is not None
    header = ["tone_index"] + [f"user_{n + 1}_dbm_hz" for n in range(scenario.n_users)]
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for index, row in zip(scenario.tone_indices, psd):
            writer.writerow([int(index)] + [_format(v) for v in row])
    logger.info(f"💾 Wrote spectra to {path}")
    return path


def save_trace(path: PathLike, report: Any) -> Path:
    """Write the per-iteration trace of a solver report as CSV."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n_users = len(report.lam)
    header = ["iter", "dual_value", "violation_norm", "max_complementarity"]
    header += [f"lambda_{n + 1}" for n in range(n_users)]
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in report.trace:
            writer.writerow(
                [row.iteration, _format(row.dual_value), _format(row.violation_norm),
                 _format(row.max_complementarity)]
                + [_format(v) for v in row.lam]
            )
    logger.info(f"💾 Wrote trace with {len(report.trace)} rows to {path}")
    return path


def load_spectra(path: PathLike, scenario: Scenario) -> SpectrumAllocation:
    """Read a spectra CSV written by :func:`save_allocation` back into mW."""
    path = Path(path)
    with open(path, "r", encoding="utf-8", newline="") as f:
        rows: List[List[str]] = list(csv.reader(f))
    if not rows or rows[0][0] != "tone_index":
        raise ScenarioValidationError(f"{path}: missing spectra header")
    body = rows[1:]
    if len(body) != scenario.n_tones or any(len(r) != scenario.n_users + 1 for r in body):
        raise ScenarioValidationError(
            f"{path}: expected {scenario.n_tones} rows of {scenario.n_users} users"
        )
    psd = np.array([[float(v) for v in r[1:]] for r in body])
    power = np.asarray(psd_to_tone_power(psd, scenario.constants.tone_spacing_hz))
    return SpectrumAllocation(power)


def summary_record(values: Dict[str, Any]) -> Dict[str, Any]:
    """Convert numpy values to plain JSON types."""
    record: Dict[str, Any] = {}
    for key, value in values.items():
        if isinstance(value, np.ndarray):
            record[key] = value.tolist()
        elif isinstance(value, np.generic):
            record[key] = value.item()
        else:
            record[key] = value
    return record
