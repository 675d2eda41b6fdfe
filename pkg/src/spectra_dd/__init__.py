"""
Spectra DD - DSL spectrum balancing by Lagrange dual decomposition.

Solves the constrained weighted rate-sum problem of multi-user DSL with the
classical subgradient scheme and with a smoothed-dual optimal-gradient
scheme, with interleaving to recover feasible spectra when per-tone optima tie.
"""

__version__ = "1.0.0"
__author__ = "Spectra DD Team"

from .core.dual_solvers import SolverConfig, SolverReport, solve
from .core.exceptions import (
    ConfigurationError,
    ScenarioValidationError,
    SolverError,
    SpectraError,
)
from .core.model import Scenario, SpectrumAllocation, weighted_rate_sum
from .preprocessing.scenario_io import load_scenario

__all__ = [
    "Scenario",
    "SpectrumAllocation",
    "SolverConfig",
    "SolverReport",
    "solve",
    "load_scenario",
    "weighted_rate_sum",
    "SpectraError",
    "ScenarioValidationError",
    "ConfigurationError",
    "SolverError",
]
