"""Tests for the convexity certificates and the Fisher identity."""

import math

import numpy as np
import pytest

from noisefill.convexity import (
    UnsupportedModelError,
    check_c1,
    check_c3,
    convexity_boundary,
    fisher_information,
    second_derivative_mi,
)
from noisefill.inputs import BinaryInput, ExponentialInput, GaussianInput, TabulatedInput


class TestC1Margin:
    def test_gaussian_analytic(self):
        # For mmse = 1/(1+rho) the margin is 1/(1+rho) + 1/(1+rho)^2.
        g = GaussianInput()
        for rho in (0.01, 0.5, 3.0, 40.0):
            expected = 1.0 / (1.0 + rho) + 1.0 / (1.0 + rho) ** 2
            assert math.isclose(check_c1(g, rho), expected, rel_tol=1e-6)

    def test_gaussian_positive_everywhere(self):
        g = GaussianInput()
        assert all(check_c1(g, r) > 0 for r in np.geomspace(1e-3, 1e3, 25))

    def test_binary_sign_change(self):
        b = BinaryInput()
        assert check_c1(b, 3.0) > 0
        assert check_c1(b, 4.0) < 0

    def test_finite_difference_oracle(self):
        # Margin equals d^2/dN^2 of MI up to the positive prefactor, so a
        # direct second difference of the MI curve must agree in sign and
        # roughly in scale.
        b = BinaryInput()
        P, Z = 1.0, 0.25
        for N, sign in ((0.0, -1.0), (0.15, 1.0)):
            h = 1e-3
            mi = [b.mutual_info(P / (N + d + Z)) for d in (-h, 0.0, h)] if N > 0 else None
            if mi is None:
                h = 5e-4
                mi = [b.mutual_info(P / (N + d + Z)) for d in (0.0, h, 2 * h)]
            second = (mi[0] - 2.0 * mi[1] + mi[2]) / h**2
            margin = check_c1(b, P / (N + Z))
            assert math.copysign(1.0, second) == sign
            assert math.copysign(1.0, margin) == sign

    def test_rejects_nonpositive_snr(self):
        with pytest.raises(ValueError):
            check_c1(GaussianInput(), 0.0)


class TestC3Certificate:
    def test_gaussian_value(self):
        assert math.isclose(check_c3(GaussianInput(), 2.0), 1.0 / 9.0, rel_tol=1e-12)

    def test_gaussian_approaches_one_at_zero_snr(self):
        assert check_c3(GaussianInput(), 1e-9) == pytest.approx(1.0, abs=1e-8)

    def test_gaussian_quadrature_cross_check(self):
        # Independent path: for a Gaussian input the output is N(0, 1+rho)
        # in normalized units, whose log-density curvature is -1/(1+rho).
        rho = 2.0
        curv = -1.0 / (1.0 + rho)
        assert math.isclose(check_c3(GaussianInput(), rho), curv**2, rel_tol=1e-12)

    def test_exponential_within_unit_bound(self):
        e = ExponentialInput()
        for rho in (0.1, 1.0, 10.0):
            val = check_c3(e, rho)
            assert 0.0 < val <= 1.0 + 1e-6

    def test_unsupported_models_raise(self):
        with pytest.raises(UnsupportedModelError):
            check_c3(BinaryInput(), 1.0)
        with pytest.raises(UnsupportedModelError):
            check_c3(TabulatedInput([0.0, 1.0], [1.0, 0.5]), 1.0)


class TestFisherInformation:
    @pytest.mark.parametrize("rho", [0.25, 1.0, 5.0])
    def test_mmse_identity_gaussian(self, rho):
        g = GaussianInput()
        assert math.isclose(fisher_information(g, rho), 1.0 - rho * g.mmse(rho), rel_tol=1e-12)

    @pytest.mark.parametrize("rho", [0.5, 2.0, 8.0])
    def test_mmse_identity_exponential(self, rho):
        e = ExponentialInput()
        assert math.isclose(
            fisher_information(e, rho), 1.0 - rho * e.mmse(rho), abs_tol=1e-9
        )

    def test_unsupported_model(self):
        with pytest.raises(UnsupportedModelError):
            fisher_information(BinaryInput(), 1.0)


class TestSecondDerivativeMi:
    def test_gaussian_convex(self):
        assert second_derivative_mi(GaussianInput(), 1.0, 1.0, 0.0) > 0

    def test_binary_past_boundary_concave(self):
        assert second_derivative_mi(BinaryInput(), 5.0, 1.0, 0.0) < 0

    def test_zero_power_channel(self):
        assert second_derivative_mi(BinaryInput(), 0.0, 1.0, 0.0) == 0.0

    def test_masking_noise_can_restore_convexity(self):
        # rho = 5 is past the binary boundary, but enough masking noise
        # drags the SNR back into the convex region.
        b = BinaryInput()
        assert second_derivative_mi(b, 5.0, 1.0, 0.0) < 0
        assert second_derivative_mi(b, 5.0, 1.0, 1.0) > 0

    def test_validation(self):
        with pytest.raises(ValueError):
            second_derivative_mi(GaussianInput(), 1.0, 0.0, 0.0)
        with pytest.raises(ValueError):
            second_derivative_mi(GaussianInput(), 1.0, 1.0, -1.0)


class TestConvexityBoundary:
    def test_binary_boundary_location(self):
        boundary = convexity_boundary(BinaryInput(), 1.0, 10.0)
        assert boundary == pytest.approx(3.35, abs=0.05)

    def test_bisection_tightens_with_tolerance(self):
        coarse = convexity_boundary(BinaryInput(), 1.0, 10.0, tol=1e-2)
        fine = convexity_boundary(BinaryInput(), 1.0, 10.0, tol=1e-6)
        assert abs(coarse - fine) < 0.1

    def test_always_convex_models_report_none(self):
        assert convexity_boundary(GaussianInput(), 0.01, 100.0) is None
        assert convexity_boundary(ExponentialInput(), 0.01, 100.0) is None

    def test_bad_bracket(self):
        with pytest.raises(ValueError):
            convexity_boundary(GaussianInput(), 2.0, 1.0)
