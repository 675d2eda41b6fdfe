"""
Preprocessing modules for Spectra DD.

Scenario documents, synthetic channel generation and file I/O.
"""

from .channel_model import random_scenario, synth_scenario
from .scenario_io import (
    load_scenario,
    load_spectra,
    save_allocation,
    save_scenario,
    save_trace,
)
from .schema import ChannelModelSpec, ScenarioDocument

__all__ = [
    "ChannelModelSpec",
    "ScenarioDocument",
    "load_scenario",
    "load_spectra",
    "random_scenario",
    "save_allocation",
    "save_scenario",
    "save_trace",
    "synth_scenario",
]
