"""Tests for the named preset scenarios."""

import numpy as np
import pytest

from spectra_dd.core.exceptions import UnknownPresetError
from spectra_dd.tools.presets import PRESETS, list_presets, preset


class TestPresets:
    """Test suite for preset construction."""

    def test_list(self):
        """Test that every preset is listed with a description."""
        names = [name for name, _ in list_presets()]
        assert names == list(PRESETS)
        assert "vdsl-up-6sym" in names

    def test_unknown(self):
        """Test that unknown names raise UnknownPresetError."""
        with pytest.raises(UnknownPresetError, match="Available"):
            preset("vdsl-up-99")

    def test_vdsl_up_6(self):
        """Test the six-user upstream instance at full resolution."""
        scenario = preset("vdsl-up-6")
        assert scenario.n_users == 6
        assert scenario.n_tones == 1147
        direct = np.diagonal(scenario.gains_sq[0])
        assert len(set(direct.tolist())) == 6
        np.testing.assert_array_equal(scenario.tone_indices[[0, -1]], [870, 2782])

    def test_stride(self):
        """Test that the tone stride thins the band plan."""
        full = preset("vdsl-up-4")
        thin = preset("vdsl-up-4", tone_stride=10)
        assert thin.n_tones < full.n_tones / 5
        np.testing.assert_array_equal(thin.gains_sq[0], full.gains_sq[0])

    def test_symmetric_users(self):
        """Test that the three 300 m lines are interchangeable."""
        scenario = preset("vdsl-up-6sym", tone_stride=20)
        order = [0, 1, 2, 4, 5, 3]
        permuted = scenario.gains_sq[:, order][:, :, order]
        np.testing.assert_allclose(permuted, scenario.gains_sq, rtol=1e-14)

    def test_adsl_budget(self):
        """Test the ADSL budget of 20.4 dBm and the band."""
        scenario = preset("adsl-nearfar-2")
        np.testing.assert_allclose(scenario.power_budget, 10**2.04)
        assert scenario.n_tones == 224

    @pytest.mark.parametrize("name", sorted(PRESETS))
    def test_budgets_bind(self, name):
        """Test that the summed masks exceed every budget."""
        scenario = preset(name)
        assert np.all(scenario.mask.sum(axis=0) > scenario.power_budget)

    def test_budgets_bind_when_thinned(self):
        """Test that a strided preset keeps its budgets binding."""
        full = preset("adsl-nearfar-2")
        thin = preset("adsl-nearfar-2", tone_stride=8)
        assert thin.n_tones == 28
        np.testing.assert_allclose(thin.power_budget, full.power_budget * 28 / 224)
        assert np.all(thin.mask.sum(axis=0) > thin.power_budget)

    def test_near_far_gap(self):
        """Test that far users sit at least 30 dB below near users in the top band."""
        scenario = preset("vdsl-up-4", tone_stride=50)
        top = scenario.gains_sq[-1]
        far = 10 * np.log10(np.diagonal(top)[:2])
        near = 10 * np.log10(np.diagonal(top)[2:])
        assert np.all(near.min() - far.max() >= 30.0)
