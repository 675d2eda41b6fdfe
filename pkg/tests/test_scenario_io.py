"""Tests for scenario files, the synthetic channel model and CSV outputs."""

import csv
import json
from dataclasses import replace

import numpy as np
import pytest
import yaml
from pydantic import ValidationError

from spectra_dd.core.dual_solvers import SolverConfig, solve_subgradient
from spectra_dd.core.exceptions import ScenarioValidationError
from spectra_dd.core.model import SpectrumAllocation, weighted_rate_sum
from spectra_dd.core.units import linear_to_db
from spectra_dd.preprocessing.channel_model import band_plan, insertion_gain, synth_scenario
from spectra_dd.preprocessing.scenario_io import (
    load_document,
    load_scenario,
    load_spectra,
    save_allocation,
    save_document,
    save_scenario,
    save_trace,
    scenario_from_document,
    summary_record,
)
from spectra_dd.preprocessing.schema import ChannelModelSpec, ScenarioDocument


class TestScenarioDocuments:
    """Test suite for reading and writing scenario files."""

    def test_document_round_trip(self, temp_dir, scenario_document):
        """Test that JSON -> document -> JSON keeps every value."""
        source = temp_dir / "scenario.json"
        source.write_text(json.dumps(scenario_document))
        document = load_document(source)
        copy = load_document(save_document(temp_dir / "copy.json", document))
        assert copy.model_dump() == document.model_dump()

    def test_explicit_tones(self, temp_dir, scenario_document):
        """Test conversion of dB quantities to linear units."""
        path = temp_dir / "scenario.yaml"
        path.write_text(yaml.safe_dump(scenario_document))
        scenario = load_scenario(path)
        assert scenario.n_users == 2
        assert scenario.n_tones == 2
        assert scenario.name == "two-tone"
        np.testing.assert_array_equal(scenario.tone_indices, [32, 33])
        assert scenario.gains_sq[0, 0, 0] == pytest.approx(0.01)
        assert scenario.noise[0, 0] == pytest.approx(1e-14 * 4312.5)
        assert scenario.mask[0, 0] == pytest.approx(1e-4 * 4312.5)
        np.testing.assert_allclose(scenario.power_budget, 10**1.15)
        assert scenario.constants.snr_gap == pytest.approx(10**1.29)

    def test_zero_gain_writes_valid_json(self, temp_dir, small_scenario):
        """Test that a zero crosstalk gain is stored as strict JSON and reloads as zero."""
        gains = np.array(small_scenario.gains_sq)
        gains[0, 0, 1] = 0.0
        scenario = replace(small_scenario, gains_sq=gains)
        path = save_scenario(temp_dir / "zero.json", scenario)
        text = path.read_text()
        assert "Infinity" not in text and "NaN" not in text
        json.loads(text)
        loaded = load_scenario(path)
        assert loaded.gains_sq[0, 0, 1] == 0.0
        np.testing.assert_allclose(loaded.gains_sq, gains, rtol=1e-12)
        np.testing.assert_allclose(loaded.noise, scenario.noise, rtol=1e-12)

    def test_scenario_round_trip(self, temp_dir, small_scenario):
        """Test that scenario -> file -> scenario is exact up to dB rounding."""
        loaded = load_scenario(save_scenario(temp_dir / "small.json", small_scenario))
        np.testing.assert_allclose(loaded.gains_sq, small_scenario.gains_sq, rtol=1e-12)
        np.testing.assert_allclose(loaded.noise, small_scenario.noise, rtol=1e-12)
        np.testing.assert_allclose(loaded.mask, small_scenario.mask, rtol=1e-12)
        np.testing.assert_allclose(loaded.power_budget, small_scenario.power_budget, rtol=1e-12)
        np.testing.assert_array_equal(loaded.tone_indices, small_scenario.tone_indices)
        assert loaded.constants.snr_gap == pytest.approx(1.0)

    def test_validation_message_names_field(self, temp_dir, scenario_document):
        """Test that schema errors point at the offending field."""
        scenario_document["users"][0]["budget_dbm"] = "loud"
        path = temp_dir / "bad.json"
        path.write_text(json.dumps(scenario_document))
        with pytest.raises(ScenarioValidationError, match=r"users\.0\.budget_dbm"):
            load_scenario(path)

    def test_wrong_matrix_size(self, temp_dir, scenario_document):
        """Test that a gain matrix of the wrong size is rejected."""
        scenario_document["tones"][1]["gains_sq_db"] = [[-20.0]]
        path = temp_dir / "bad.json"
        path.write_text(json.dumps(scenario_document))
        with pytest.raises(ScenarioValidationError, match="gains_sq_db"):
            load_scenario(path)

    def test_needs_tones_or_synthetic(self, temp_dir):
        """Test that a file with neither tones nor a synthetic block is rejected."""
        path = temp_dir / "empty.json"
        path.write_text(json.dumps({"name": "nothing"}))
        with pytest.raises(ScenarioValidationError):
            load_scenario(path)

    def test_users_with_synthetic_rejected(self, temp_dir):
        """Test that top-level users cannot sit next to a synthetic block."""
        path = temp_dir / "mixed.json"
        path.write_text(
            json.dumps(
                {
                    "users": [{"budget_dbm": 11.5}],
                    "synthetic": {"lengths_m": [1000], "tone_indices": [40]},
                }
            )
        )
        with pytest.raises(ScenarioValidationError, match="synthetic"):
            load_scenario(path)

    def test_missing_file(self, temp_dir):
        """Test that a missing file raises FileNotFoundError."""
        with pytest.raises(FileNotFoundError):
            load_scenario(temp_dir / "missing.json")

    def test_top_level_must_be_mapping(self, temp_dir):
        """Test that a list at the top level is rejected."""
        path = temp_dir / "list.yaml"
        path.write_text("- 1\n- 2\n")
        with pytest.raises(ScenarioValidationError):
            load_scenario(path)

    def test_synthetic_block(self, temp_dir):
        """Test that a synthetic block is expanded by the cable model."""
        path = temp_dir / "synth.json"
        path.write_text(
            json.dumps(
                {
                    "name": "synth",
                    "synthetic": {"lengths_m": [1000, 500], "bands": [[32, 40]], "tone_stride": 2},
                }
            )
        )
        scenario = load_scenario(path)
        assert scenario.name == "synth"
        np.testing.assert_array_equal(scenario.tone_indices, [32, 34, 36, 38, 40])
        freq = 32 * 4312.5 / 1e6
        assert scenario.gains_sq[0, 0, 0] == pytest.approx(insertion_gain(1000.0, freq, 0.02))
        assert scenario.gains_sq[0, 1, 1] > scenario.gains_sq[0, 0, 0]


class TestChannelModel:
    """Test suite for the parametric cable model."""

    def test_zero_length_is_lossless(self):
        """Test that a zero-length line passes all power."""
        assert insertion_gain(0.0, 1.0, 0.02) == 1.0

    def test_attenuation_scales_in_db(self):
        """Test that doubling k_a doubles the attenuation in dB."""
        single = linear_to_db(insertion_gain(800.0, 2.0, 0.02))
        double = linear_to_db(insertion_gain(800.0, 2.0, 0.04))
        assert double == pytest.approx(2 * single)

    def test_band_plan_stride(self):
        """Test that the stride thins the band plan."""
        spec = ChannelModelSpec(lengths_m=[100.0], bands=[(1, 10)], tone_stride=3)
        np.testing.assert_array_equal(band_plan(spec), [1, 4, 7, 10])

    def test_stride_scales_budget(self):
        """Test that a thinned band plan keeps the budget-to-mask ratio."""
        full = synth_scenario(ChannelModelSpec(lengths_m=[300.0], bands=[(1, 12)]))
        thin = synth_scenario(
            ChannelModelSpec(lengths_m=[300.0], bands=[(1, 12)], tone_stride=4)
        )
        assert thin.n_tones == 3
        np.testing.assert_allclose(thin.power_budget, full.power_budget / 4, rtol=1e-14)

    def test_explicit_tone_indices(self):
        """Test explicit tone indices are sorted and deduplicated."""
        spec = ChannelModelSpec(lengths_m=[100.0], tone_indices=[9, 3, 3, 5])
        np.testing.assert_array_equal(band_plan(spec), [3, 5, 9])

    def test_non_positive_length_rejected(self):
        """Test that a zero line length is rejected."""
        spec = ChannelModelSpec(lengths_m=[0.0, 300.0], bands=[(32, 40)])
        with pytest.raises(ScenarioValidationError):
            synth_scenario(spec)

    def test_band_plan_choice(self):
        """Test that exactly one of bands and tone indices is accepted."""
        with pytest.raises(ValidationError):
            ChannelModelSpec(lengths_m=[100.0])
        with pytest.raises(ValidationError):
            ChannelModelSpec(lengths_m=[100.0], bands=[(1, 2)], tone_indices=[1])
        with pytest.raises(ValidationError):
            ChannelModelSpec(lengths_m=[100.0], bands=[(10, 2)])

    def test_crosstalk_grows_with_frequency(self):
        """Test that crosstalk coupling rises over a short line."""
        spec = ChannelModelSpec(lengths_m=[300.0, 300.0], bands=[(100, 2000)], tone_stride=100)
        scenario = synth_scenario(spec)
        crosstalk = scenario.gains_sq[:, 0, 1]
        assert crosstalk[-1] > crosstalk[0]
        assert np.all(crosstalk < scenario.gains_sq[:, 0, 0])


class TestOutputs:
    """Test suite for spectra and trace CSV files."""

    def test_spectra_round_trip(self, temp_dir, small_scenario):
        """Test that written spectra reload to the same rates, zeros included."""
        power = np.array(small_scenario.flat_allocation().power)
        power[1, 0] = 0.0
        alloc = SpectrumAllocation(power)
        path = save_allocation(temp_dir / "spectra.csv", small_scenario, alloc)
        with open(path, newline="") as f:
            rows = list(csv.reader(f))
        assert rows[0] == ["tone_index", "user_1_dbm_hz", "user_2_dbm_hz"]
        assert rows[2][1] == "-inf"
        loaded = load_spectra(path, small_scenario)
        assert loaded.power[1, 0] == 0.0
        assert weighted_rate_sum(small_scenario, loaded) == pytest.approx(
            weighted_rate_sum(small_scenario, alloc), rel=1e-9
        )

    def test_spectra_shape_mismatch(self, temp_dir, small_scenario, single_user_scenario):
        """Test that spectra for another scenario are rejected."""
        path = save_allocation(
            temp_dir / "spectra.csv", small_scenario, small_scenario.flat_allocation()
        )
        with pytest.raises(ScenarioValidationError):
            load_spectra(path, single_user_scenario)

    def test_trace_columns(self, temp_dir, small_scenario):
        """Test the trace header and one row per iteration."""
        report = solve_subgradient(small_scenario, SolverConfig(solver="subgradient", i_max=3))
        path = save_trace(temp_dir / "trace.csv", report)
        with open(path, newline="") as f:
            rows = list(csv.reader(f))
        assert rows[0] == [
            "iter",
            "dual_value",
            "violation_norm",
            "max_complementarity",
            "lambda_1",
            "lambda_2",
        ]
        assert len(rows) == report.iterations + 1
        assert [int(r[0]) for r in rows[1:]] == list(range(report.iterations))

    def test_summary_record(self):
        """Test that numpy values become plain JSON types."""
        record = summary_record({"a": np.array([1.0, 2.0]), "b": np.float64(3.5), "c": "x"})
        assert record == {"a": [1.0, 2.0], "b": 3.5, "c": "x"}
        assert type(record["b"]) is float
        json.dumps(record)

    def test_scenario_from_document_in_memory(self, scenario_document):
        """Test building a scenario from a validated document object."""
        scenario = scenario_from_document(ScenarioDocument.model_validate(scenario_document))
        assert scenario.weights.tolist() == [0.5, 0.5]
