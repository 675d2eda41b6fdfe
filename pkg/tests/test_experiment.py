"""Tests for the experiment runner and the convergence comparison."""

import json
from pathlib import Path

import pytest
import yaml
from pydantic import ValidationError

from spectra_dd.core.dual_solvers import load_solver_config
from spectra_dd.core.exceptions import ConfigurationError
from spectra_dd.core.model import objective_scale, weighted_rate_sum
from spectra_dd.preprocessing.channel_model import random_scenario
from spectra_dd.preprocessing.scenario_io import load_spectra, save_scenario
from spectra_dd.tools.experiment import (
    ConvergenceComparison,
    ExperimentSpec,
    compare_convergence,
    iterations_to_accuracy,
    load_experiment,
    resolve_scenario,
    run_experiment,
)
from spectra_dd.tools.presets import preset


def random_spec(**overrides) -> ExperimentSpec:
    data = {
        "name": "random-pair",
        "random": {"n_users": 2, "n_tones": 4},
        "seeds": [0, 1],
        "solvers": [
            {"label": "cvx", "solver": "improved-convex", "i_max": 10},
            {"label": "sub", "solver": "subgradient", "i_max": 10},
        ],
    }
    data.update(overrides)
    return ExperimentSpec.model_validate(data)


class TestExperimentSpec:
    """Test suite for experiment spec validation."""

    def test_exactly_one_source(self):
        """Test that a spec needs exactly one scenario source."""
        with pytest.raises(ValidationError):
            random_spec(scenario="adsl-nearfar-2")
        with pytest.raises(ValidationError):
            ExperimentSpec.model_validate({"solvers": [{"solver": "ica-dsb"}]})

    def test_unique_labels(self):
        """Test that repeated solver labels are rejected."""
        with pytest.raises(ValidationError, match="unique"):
            random_spec(solvers=[{"solver": "ica-dsb"}, {"solver": "ica-dsb"}])

    def test_needs_a_solver(self):
        """Test that an empty solver list is rejected."""
        with pytest.raises(ValidationError):
            random_spec(solvers=[])

    def test_load_invalid_file(self, temp_dir):
        """Test that invalid files raise ConfigurationError."""
        path = temp_dir / "spec.yaml"
        path.write_text(yaml.safe_dump({"random": {"n_users": 0}, "solvers": [{}]}))
        with pytest.raises(ConfigurationError, match="n_users"):
            load_experiment(path)

    def test_load_yaml(self, temp_dir):
        """Test loading a valid YAML spec."""
        path = temp_dir / "spec.yaml"
        path.write_text(
            yaml.safe_dump({"scenario": "adsl-nearfar-2", "tone_stride": 8, "solvers": [{}]})
        )
        spec = load_experiment(path)
        assert spec.scenario == "adsl-nearfar-2"
        assert spec.solvers[0].solver == "ica-dsb"

    def test_resolve_scenario(self, temp_dir, small_scenario):
        """Test that preset names win and other references are file paths."""
        assert resolve_scenario("adsl-nearfar-2", 8).n_tones == preset("adsl-nearfar-2", 8).n_tones
        path = save_scenario(temp_dir / "small.json", small_scenario)
        assert resolve_scenario(str(path)).n_tones == 4


class TestRunExperiment:
    """Test suite for running experiments."""

    def test_random_family(self, temp_dir):
        """Test that every solver runs on every seed and writes its files."""
        result = run_experiment(random_spec(), temp_dir)
        runs = result.summary["runs"]
        assert len(runs) == 4
        assert [(r["label"], r["seed"]) for r in runs] == [
            ("cvx", 0), ("sub", 0), ("cvx", 1), ("sub", 1)
        ]
        assert result.failures == []
        for run in runs:
            assert (temp_dir / run["trace_file"]).exists()
            assert (temp_dir / run["spectra_file"]).exists()
            assert run["iterations"] >= 1
            assert len(run["user_rates"]) == 2
        assert (temp_dir / "cvx_seed1_spectra.csv").exists()
        summary = json.loads(result.summary_path.read_text())
        assert summary["experiment"] == "random-pair"
        assert summary["scenario"] is None

    def test_spectra_reload_matches_rate(self, temp_dir):
        """Test that the written spectra reproduce the reported weighted rate."""
        result = run_experiment(random_spec(seeds=[3]), temp_dir)
        run = result.summary["runs"][0]
        scenario = random_scenario(2, 4, seed=3)
        alloc = load_spectra(temp_dir / run["spectra_file"], scenario)
        assert weighted_rate_sum(scenario, alloc) == pytest.approx(run["weighted_rate"], rel=1e-9)

    def test_outputs_are_deterministic(self, temp_dir):
        """Test that reruns and parallel runs write identical CSVs."""
        first = run_experiment(random_spec(), temp_dir / "a")
        run_experiment(random_spec(), temp_dir / "b")
        run_experiment(random_spec(jobs=2), temp_dir / "c")
        for run in first.summary["runs"]:
            for key in ("trace_file", "spectra_file"):
                reference = (temp_dir / "a" / run[key]).read_bytes()
                assert (temp_dir / "b" / run[key]).read_bytes() == reference
                assert (temp_dir / "c" / run[key]).read_bytes() == reference

    def test_failures_are_recorded(self, temp_dir):
        """Test that a failing run is reported without stopping the others."""
        spec = random_spec(
            seeds=[0],
            solvers=[
                {"label": "tiny-grid", "solver": "improved-direct", "pertone": "exhaustive",
                 "max_grid_points": 1},
                {"label": "ok", "solver": "subgradient", "i_max": 5},
            ],
        )
        result = run_experiment(spec, temp_dir)
        assert [f["label"] for f in result.failures] == ["tiny-grid"]
        assert result.reports[0] is None
        assert result.reports[1] is not None
        assert result.summary["runs"][1]["error"] is None

    def test_scenario_file_has_no_seed(self, temp_dir, small_scenario):
        """Test that file scenarios run once, without a seed suffix."""
        path = save_scenario(temp_dir / "small.json", small_scenario)
        spec = random_spec(random=None, scenario=str(path), seeds=[0, 1, 2])
        result = run_experiment(spec, temp_dir / "out")
        assert [r["seed"] for r in result.summary["runs"]] == [None, None]
        assert (temp_dir / "out" / "cvx_trace.csv").exists()


class TestConvergenceComparison:
    """Test suite for the iteration-count comparison."""

    def test_iterations_to_accuracy(self):
        """Test the 1-based first hit and the no-hit case."""
        assert iterations_to_accuracy([10.0, 5.0, 1.0004, 1.0], 1.0, 5e-4) == 3
        assert iterations_to_accuracy([10.0, 5.0], 1.0, 5e-4) is None

    def test_speedup(self):
        """Test the ratio of the best subgradient count to the improved count."""
        comparison = ConvergenceComparison(1e-3, 1.0, 10, {0.1: 50, 0.01: None, 1.0: 80})
        assert comparison.speedup() == 5.0
        assert ConvergenceComparison(1e-3, 1.0, 10, {0.1: None}).speedup() == float("inf")
        assert ConvergenceComparison(1e-3, 1.0, None, {0.1: 5}).speedup() is None

    @pytest.mark.slow
    def test_nearfar_speedup(self):
        """Test that the improved scheme needs 5x fewer iterations than every q/i schedule."""
        scenario = preset("adsl-nearfar-2", tone_stride=4)
        result = compare_convergence(scenario)
        assert result.improved_iterations is not None
        assert result.improved_iterations < 500
        assert set(result.subgradient_iterations) == {1e-4, 1e-3, 1e-2, 1e-1}
        assert result.speedup() >= 5

    @pytest.mark.slow
    def test_relative_step_scale(self):
        """Test that relative stepsizes are scaled by objective / ||P||^2."""
        scenario = preset("adsl-nearfar-2", tone_stride=16)
        result = compare_convergence(scenario, q_values=(0.1,), max_iters=20, relative_q=True)
        budget = scenario.power_budget
        assert result.step_scale == pytest.approx(objective_scale(scenario) / (budget @ budget))
        assert result.reference_value > 0


class TestShippedSpecs:
    """Test suite for the example files under experiments/."""

    EXPERIMENTS = Path(__file__).resolve().parent.parent / "experiments"

    @pytest.mark.parametrize("name", ["nearfar.yaml", "random-small.yaml"])
    def test_experiment_specs_load(self, name):
        """Test that the shipped experiment specs validate."""
        spec = load_experiment(self.EXPERIMENTS / name)
        assert len(spec.solvers) >= 2

    def test_solver_config_loads(self):
        """Test that the shipped solver config validates."""
        config = load_solver_config(self.EXPERIMENTS / "solver-ica.yaml")
        assert config.solver == "ica-dsb"
