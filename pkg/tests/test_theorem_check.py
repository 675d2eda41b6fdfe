"""Tests for the duality-gap and feasibility guarantee check."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spectra_dd.core.dual_solvers import smoothing_schedule
from spectra_dd.core.exceptions import VerificationError
from spectra_dd.preprocessing.channel_model import random_scenario
from spectra_dd.tools.theorem_check import TheoremCheck, verify_theorem2, violation_bound


def failed_check() -> TheoremCheck:
    return TheoremCheck(
        scenario="demo",
        epsilon=0.1,
        i_max=3,
        smoothness_c=1.0,
        lipschitz=2.0,
        gap=0.5,
        violation=0.0,
        violation_bound=1.0,
        lam_hat=[1.0],
        lam_star=[1.0],
        passed=False,
    )


class TestViolationBound:
    """Test suite for the feasibility bound."""

    def test_zero_multiplier(self):
        """Test eps * sqrt(2) at lam* = 0."""
        assert violation_bound(0.1, np.zeros(2)) == pytest.approx(0.1 * np.sqrt(2.0))

    def test_grows_with_multiplier(self):
        """Test that the bound increases with ||lam*||."""
        assert violation_bound(0.1, np.array([3.0, 4.0])) == pytest.approx(
            0.1 * (5.0 + np.sqrt(27.0))
        )


class TestTheoremCheck:
    """Test suite for TheoremCheck records."""

    def test_raise_for_failure(self):
        """Test that a failed check raises with measured values and bounds."""
        with pytest.raises(VerificationError) as excinfo:
            failed_check().raise_for_failure()
        assert excinfo.value.measured["gap"] == 0.5
        assert excinfo.value.bounds["gap"] == 0.1

    def test_passed_check_is_silent(self):
        """Test that a passing check does not raise."""
        check = failed_check()
        check.passed = True
        check.raise_for_failure()

    def test_as_dict(self):
        """Test the JSON-ready record."""
        record = failed_check().as_dict()
        assert record["scenario"] == "demo"
        assert record["lam_star"] == [1.0]


class TestPositivePartInequality:
    """Test suite for y . z <= ||[y]^+|| ||z|| on the non-negative orthant."""

    @settings(max_examples=100, deadline=None)
    @given(
        pairs=st.lists(
            st.tuples(st.floats(-1e3, 1e3), st.floats(0.0, 1e3)), min_size=1, max_size=6
        )
    )
    def test_holds_for_non_negative_z(self, pairs):
        """Test the inequality on random vectors with z >= 0."""
        y = np.array([p[0] for p in pairs])
        z = np.array([p[1] for p in pairs])
        bound = float(np.linalg.norm(np.maximum(y, 0.0)) * np.linalg.norm(z))
        assert float(y @ z) <= bound * (1 + 1e-12) + 1e-9


@pytest.mark.slow
class TestVerifyTheorem2:
    """Test suite for the end-to-end guarantee check."""

    @pytest.mark.parametrize(
        "n_users,n_tones,seed", [(2, 8, 0), (3, 8, 1), (2, 32, 2)]
    )
    @pytest.mark.parametrize("epsilon", [1e-1, 1e-2])
    def test_bounds_hold(self, n_users, n_tones, seed, epsilon):
        """Test that gap and violation stay within their bounds."""
        scenario = random_scenario(n_users, n_tones, seed=seed)
        check = verify_theorem2(scenario, epsilon)
        assert check.passed, check.as_dict()
        assert check.violation <= check.violation_bound * (1 + 1e-9)
        d_total = 0.5 * float(np.sum(scenario.upper**2))
        expected = max(1, math.ceil(2.0 * math.sqrt(n_tones * d_total) / epsilon) - 1)
        assert check.i_max == expected
        assert smoothing_schedule(scenario, epsilon).i_max == expected

    def test_budget_scales_with_accuracy(self):
        """Test that halving eps roughly doubles i_max."""
        scenario = random_scenario(2, 8, seed=0)
        coarse = verify_theorem2(scenario, 2e-2, reference_factor=10.0)
        fine = verify_theorem2(scenario, 1e-2, reference_factor=10.0)
        assert abs((fine.i_max + 1) - 2 * (coarse.i_max + 1)) <= 2
        assert fine.smoothness_c == pytest.approx(coarse.smoothness_c / 2)
