"""
Tests for the special functions
"""

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from probcon.special import (
    log_bessel_i,
    log_sphere_area,
    log_vmf_norm_const,
    mean_resultant_length,
)


def _log_c3(kappa):
    """ln of kappa / (4 pi sinh kappa), stable for large kappa."""
    log_sinh = kappa + np.log1p(-np.exp(-2.0 * kappa)) - np.log(2.0)
    return np.log(kappa) - np.log(4.0 * np.pi) - log_sinh


class TestLogBesselI:
    """Tests for log_bessel_i."""

    @pytest.mark.parametrize(
        "nu,x",
        [
            (0.0, 1.0),
            (0.5, 0.001),
            (1.5, 20.0),
            (4.0, 250.0),
            (63.0, 10.0),
            (0.0, 1e4),
            (100.0, 1e5),
        ],
    )
    def test_matches_mpmath(self, nu, x):
        """Test agreement with arbitrary-precision Bessel values."""
        expected = float(mpmath.log(mpmath.besseli(nu, x)))
        assert log_bessel_i(nu, x) == pytest.approx(expected, rel=1e-10, abs=1e-10)

    def test_zero_argument(self):
        """Test the values at x = 0."""
        assert log_bessel_i(0.0, 0.0) == 0.0
        assert log_bessel_i(2.5, 0.0) == -np.inf

    def test_half_order_closed_form(self):
        """Test I_{1/2}(x) = sqrt(2 / (pi x)) sinh x."""
        x = 3.0
        expected = 0.5 * np.log(2.0 / (np.pi * x)) + np.log(np.sinh(x))
        assert log_bessel_i(0.5, x) == pytest.approx(expected, rel=1e-12)

    def test_preserves_shape(self):
        """Test that array inputs broadcast and keep their shape."""
        out = log_bessel_i(np.array([[0.5], [1.5]]), np.array([1.0, 2.0, 3.0]))
        assert out.shape == (2, 3)
        assert isinstance(log_bessel_i(1.0, 2.0), float)

    def test_rejects_negative_inputs(self):
        """Test that negative orders and arguments raise."""
        with pytest.raises(ValueError):
            log_bessel_i(-1.0, 2.0)
        with pytest.raises(ValueError):
            log_bessel_i(1.0, -2.0)


class TestLogVmfNormConst:
    """Tests for log_vmf_norm_const."""

    def test_matches_three_dimensional_closed_form(self):
        """Test D = 3 against kappa / (4 pi sinh kappa) over [1e-3, 500]."""
        kappa = np.logspace(-3, np.log10(500.0), 200)
        np.testing.assert_allclose(log_vmf_norm_const(3, kappa), _log_c3(kappa), rtol=0, atol=1e-10)

    def test_uniform_limit(self):
        """Test that kappa = 0 gives the inverse sphere area."""
        for D in (2, 3, 10, 64):
            assert log_vmf_norm_const(D, 0.0) == pytest.approx(-log_sphere_area(D), abs=1e-12)

    def test_finite_up_to_one_million(self):
        """Test finiteness for large kappa and high dimension."""
        kappa = np.array([1e3, 1e5, 1e6])
        for D in (2, 10, 128):
            assert np.all(np.isfinite(log_vmf_norm_const(D, kappa)))

    def test_dirac_limit(self):
        """Test that kappa = inf gives +inf."""
        assert log_vmf_norm_const(10, np.inf) == np.inf

    @settings(max_examples=50, deadline=None)
    @given(
        D=st.integers(min_value=2, max_value=64),
        kappa=st.floats(min_value=1e-3, max_value=1e4),
    )
    def test_strictly_decreasing(self, D, kappa):
        """Test that ln C_D decreases in kappa."""
        assert log_vmf_norm_const(D, kappa * 1.01) < log_vmf_norm_const(D, kappa)

    @pytest.mark.parametrize("D", [2, 3, 10, 64])
    def test_curvature_follows_mean_resultant(self, D):
        """Test that the slopes of ln C fall along the grid, since the slope is -A_D."""
        kappa = np.logspace(-2, 3, 200)
        slopes = np.diff(log_vmf_norm_const(D, kappa)) / np.diff(kappa)
        assert np.all(np.diff(slopes) < 1e-9)
        assert np.all(np.diff(mean_resultant_length(D, kappa)) > 0.0)

    def test_rejects_bad_dimension(self):
        """Test that D < 2 raises."""
        with pytest.raises(ValueError):
            log_vmf_norm_const(1, 1.0)


class TestMeanResultantLength:
    """Tests for mean_resultant_length."""

    def test_derivative_identity(self):
        """Test -d ln C / d kappa = A_D(kappa) by central differences."""
        kappa = np.logspace(-2, np.log10(500.0), 60)
        h = 1e-5 * np.maximum(kappa, 1.0)
        for D in (2, 3, 10, 32):
            derivative = -(log_vmf_norm_const(D, kappa + h) - log_vmf_norm_const(D, kappa - h)) / (
                2.0 * h
            )
            np.testing.assert_allclose(mean_resultant_length(D, kappa), derivative, rtol=1e-6)

    def test_three_dimensional_closed_form(self):
        """Test A_3(kappa) = coth(kappa) - 1 / kappa."""
        kappa = np.array([0.1, 1.0, 20.0, 300.0])
        expected = 1.0 / np.tanh(kappa) - 1.0 / kappa
        np.testing.assert_allclose(mean_resultant_length(3, kappa), expected, rtol=1e-10)

    def test_limits(self):
        """Test A_D(0) = 0 and A_D(inf) = 1."""
        assert mean_resultant_length(10, 0.0) == 0.0
        assert mean_resultant_length(10, np.inf) == 1.0

    def test_matches_mpmath_ratio(self):
        """Test the Bessel ratio against arbitrary precision at large kappa."""
        D, kappa = 10, 5e4
        expected = float(mpmath.besseli(D / 2, kappa) / mpmath.besseli(D / 2 - 1, kappa))
        assert mean_resultant_length(D, kappa) == pytest.approx(expected, rel=1e-10)
