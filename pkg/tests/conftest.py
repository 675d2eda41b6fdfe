"""Test configuration and shared fixtures."""

import shutil
import tempfile
from pathlib import Path

import numpy as np
import pytest

from spectra_dd.core.model import UNIT_CONSTANTS, Scenario
from spectra_dd.core.pertone import PowerGrid
from spectra_dd.preprocessing.channel_model import random_scenario


@pytest.fixture
def temp_dir():
    """Create a temporary output directory."""
    path = tempfile.mkdtemp()
    yield Path(path)
    shutil.rmtree(path)


@pytest.fixture
def on_off_grid() -> PowerGrid:
    """Two-level grid: off or at the box bound."""
    return PowerGrid(fractions=(0.0, 1.0))


@pytest.fixture
def symmetric_scenario() -> Scenario:
    """Two identical tones shared by two users with dominant symmetric crosstalk.

    Per tone, one user on and the other off beats both on; budgets allow
    each user exactly one tone at full power (ON = 1).
    """
    gains = np.array([[1.0, 0.9], [0.9, 1.0]])
    return Scenario(
        gains_sq=np.stack([gains, gains]),
        noise=np.full((2, 2), 0.01),
        weights=np.array([0.5, 0.5]),
        power_budget=np.array([1.0, 1.0]),
        mask=np.ones((2, 2)),
        constants=UNIT_CONSTANTS,
        name="symmetric-2x2",
    )


@pytest.fixture
def single_user_scenario() -> Scenario:
    """One user over four tones of decreasing gain; the budget binds, the mask does not."""
    return Scenario(
        gains_sq=np.array([1.0, 0.5, 0.25, 0.1]).reshape(4, 1, 1),
        noise=np.full((4, 1), 0.01),
        weights=np.array([1.0]),
        power_budget=np.array([1.5]),
        mask=np.ones((4, 1)),
        constants=UNIT_CONSTANTS,
        name="single-user",
    )


@pytest.fixture
def small_scenario() -> Scenario:
    """Seeded 2-user, 4-tone instance with weak crosstalk and binding budgets."""
    return random_scenario(2, 4, seed=3)


@pytest.fixture
def scenario_document() -> dict:
    """Explicit-tone scenario document as it appears in a JSON file."""
    return {
        "name": "two-tone",
        "constants": {"gamma_db": 12.9, "tone_spacing_hz": 4312.5, "symbol_rate_hz": 4000.0},
        "users": [{"budget_dbm": 11.5, "weight": 0.5}, {"budget_dbm": 11.5, "weight": 0.5}],
        "tones": [
            {
                "tone_index": 32,
                "gains_sq_db": [[-20.0, -70.0], [-75.0, -30.0]],
                "noise_dbm_hz": [-140.0, -140.0],
                "mask_dbm_hz": [-40.0, -40.0],
            },
            {
                "tone_index": 33,
                "gains_sq_db": [[-21.0, -69.0], [-74.0, -31.0]],
                "noise_dbm_hz": [-140.0, -140.0],
                "mask_dbm_hz": [-40.0, -40.0],
            },
        ],
    }
