#!/usr/bin/env python3
"""
Tests for the quadrature, root-finding and special-function kernels.
"""

import math
import os
import sys

import numpy as np
import pytest
from scipy import special

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from hydrofriction.dispersion import doppler
from hydrofriction.errors import ConvergenceError, DomainError
from hydrofriction.numerics import (
    DEFAULT_SPEC,
    QuadratureResult,
    QuadratureSpec,
    bessel_k,
    bessel_k_scaled,
    central_diff,
    find_roots_bracketed,
    gauss_legendre,
    integrate_adaptive,
    integrate_semi_infinite,
    integrate_sqrt_endpoint,
    principal_value_1d,
    require_converged,
)


class TestQuadratureSpec:
    def test_defaults(self):
        assert DEFAULT_SPEC.rel_tol == 1e-8
        assert DEFAULT_SPEC.abs_tol == 1e-14
        assert DEFAULT_SPEC.max_subdivisions == 2000

    def test_invalid(self):
        with pytest.raises(DomainError):
            QuadratureSpec(rel_tol=0.0)
        with pytest.raises(DomainError):
            QuadratureSpec(max_subdivisions=0)

    def test_loosened(self):
        spec = DEFAULT_SPEC.loosened(10.0)
        assert spec.rel_tol == pytest.approx(1e-7)
        assert spec.abs_tol == pytest.approx(1e-13)

    def test_result_arithmetic(self):
        """Sums add errors and evaluations; convergence is all-or-nothing"""
        a = QuadratureResult(1.0, 1e-9, 21, True)
        b = QuadratureResult(2.0, 2e-9, 42, False)
        total = a + b
        assert total.value == 3.0
        assert total.error_estimate == pytest.approx(3e-9)
        assert total.evaluations == 63
        assert not total.converged
        assert a.scaled(-2.0).error_estimate == pytest.approx(2e-9)

    def test_require_converged(self):
        bad = QuadratureResult(1.0, 1.0, 10, False)
        with pytest.raises(ConvergenceError) as info:
            require_converged(bad, "test")
        assert info.value.result is bad
        good = QuadratureResult(1.0)
        assert require_converged(good, "test") is good


class TestAdaptive:
    """Gauss-Kronrod quadrature on finite intervals"""

    def test_polynomial(self):
        assert integrate_adaptive(lambda x: x * x, 0.0, 1.0).value == pytest.approx(1.0 / 3.0, rel=1e-12)

    def test_sine(self):
        assert integrate_adaptive(math.sin, 0.0, math.pi).value == pytest.approx(2.0, rel=1e-12)

    def test_exponential_and_error_bound(self):
        """Converged results honour their declared tolerance"""
        result = integrate_adaptive(math.exp, 0.0, 1.0)
        assert result.converged
        assert result.value == pytest.approx(math.e - 1.0, rel=1e-10)
        assert result.error_estimate <= max(DEFAULT_SPEC.rel_tol * abs(result.value), DEFAULT_SPEC.abs_tol)
        assert result.evaluations > 0

    def test_empty_interval(self):
        assert integrate_adaptive(math.exp, 1.0, 1.0).value == 0.0

    def test_reversed_limits(self):
        with pytest.raises(DomainError):
            integrate_adaptive(math.exp, 1.0, 0.0)

    def test_non_convergence_reported(self):
        """A budget of one panel cannot resolve an oscillatory integrand"""
        spec = QuadratureSpec(rel_tol=1e-12, abs_tol=1e-15, max_subdivisions=1)
        result = integrate_adaptive(lambda x: math.sin(200.0 * x) ** 2, 0.0, 10.0, spec)
        assert not result.converged
        assert math.isfinite(result.value)


class TestEndpointSingularity:
    """Inverse-square-root endpoint via w = w0 + s^2"""

    def test_unit_interval(self):
        assert integrate_sqrt_endpoint(lambda w: 1.0 / math.sqrt(w), 0.0, 1.0).value == pytest.approx(2.0, rel=1e-12)

    def test_translated(self):
        w0 = 1.618
        result = integrate_sqrt_endpoint(lambda w: 1.0 / math.sqrt(w - w0), w0, w0 + 1.0)
        assert result.value == pytest.approx(2.0, rel=1e-12)

    def test_logarithmic_factor(self):
        """integral of ln(w)/sqrt(w) over (0, 1) is -4"""
        result = integrate_sqrt_endpoint(lambda w: math.log(w) / math.sqrt(w), 0.0, 1.0)
        assert result.value == pytest.approx(-4.0, rel=1e-8)

    def test_regular_endpoint_below(self):
        """b may lie below w0"""
        result = integrate_sqrt_endpoint(lambda w: 1.0 / math.sqrt(2.0 - w), 2.0, 1.0)
        assert result.value == pytest.approx(2.0, rel=1e-12)

    def test_agrees_with_adaptive_on_bounded_integrand(self):
        f = lambda w: math.cos(w) * math.exp(-w)  # noqa: E731
        a = integrate_adaptive(f, 0.5, 3.0)
        b = integrate_sqrt_endpoint(f, 0.5, 3.0)
        assert b.value == pytest.approx(a.value, rel=1e-9)


class TestSemiInfinite:
    """Exponentially decaying integrands on [a, inf)"""

    def test_exponential(self):
        assert integrate_semi_infinite(lambda w: math.exp(-w), 0.0, 1.0).value == pytest.approx(1.0, rel=1e-10)

    def test_moment(self):
        result = integrate_semi_infinite(lambda w: w * math.exp(-2.0 * w), 0.0, 0.5)
        assert result.value == pytest.approx(0.25, rel=1e-10)

    def test_against_exponential_integral(self):
        """integral of exp(-w)/w^2 over [1, inf) is E_2(1)"""
        result = integrate_semi_infinite(lambda w: math.exp(-w) / (w * w), 1.0, 1.0)
        assert result.value == pytest.approx(float(special.expn(2, 1.0)), rel=1e-8)

    def test_rejects_bad_scale(self):
        with pytest.raises(DomainError):
            integrate_semi_infinite(lambda w: math.exp(-w), 0.0, 0.0)

    def test_non_decaying_integrand_flagged(self):
        result = integrate_semi_infinite(lambda w: 1.0, 0.0, 1.0, max_doublings=3)
        assert not result.converged


class TestPrincipalValue:
    """Cauchy principal values with a simple pole"""

    def test_odd_about_origin(self):
        assert principal_value_1d(lambda x: 1.0 / x, 0.0, -1.0, 1.0).value == pytest.approx(0.0, abs=1e-10)

    def test_symmetric_pole(self):
        result = principal_value_1d(lambda x: 1.0 / (x - 1.0), 1.0, 0.0, 2.0)
        assert abs(result.value) <= 1e-10

    def test_linear_numerator(self):
        """x/(x-1) = 1 + 1/(x-1)"""
        result = principal_value_1d(lambda x: x / (x - 1.0), 1.0, 0.0, 2.0)
        assert abs(result.value - 2.0) <= 1e-10

    def test_asymmetric_interval(self):
        """PV of 1/(x-1) over (0, 3) is ln 2"""
        result = principal_value_1d(lambda x: 1.0 / (x - 1.0), 1.0, 0.0, 3.0)
        assert result.value == pytest.approx(math.log(2.0), rel=1e-9)

    def test_smooth_numerator(self):
        """PV of exp(x)/x over (-1, 1) is 2 Shi(1)"""
        result = principal_value_1d(lambda x: math.exp(x) / x, 0.0, -1.0, 1.0)
        shi, _ = special.shichi(1.0)
        assert result.value == pytest.approx(2.0 * shi, rel=1e-9)

    def test_linearity(self):
        f = lambda x: math.cos(x) / (x - 0.3)  # noqa: E731
        g = lambda x: 1.0 / (x - 0.3)  # noqa: E731
        combined = principal_value_1d(lambda x: 2.0 * f(x) + 3.0 * g(x), 0.3, -1.0, 2.0).value
        separate = 2.0 * principal_value_1d(f, 0.3, -1.0, 2.0).value + 3.0 * principal_value_1d(g, 0.3, -1.0, 2.0).value
        assert combined == pytest.approx(separate, rel=1e-8)

    def test_pole_outside_falls_back(self):
        result = principal_value_1d(lambda x: 1.0 / (x - 5.0), 5.0, 0.0, 2.0)
        assert result.value == pytest.approx(math.log(3.0 / 5.0), rel=1e-12)


class TestBessel:
    """K_n for n in {0, 1, 2}"""

    def test_recurrence(self):
        rng = np.random.default_rng(3)
        for x in rng.uniform(0.01, 100.0, 50):
            x = float(x)
            assert bessel_k(2, x) == pytest.approx(bessel_k(0, x) + 2.0 / x * bessel_k(1, x), rel=1e-10)

    def test_small_argument(self):
        assert bessel_k(1, 1e-3) * 1e-3 == pytest.approx(1.0, rel=1e-3)

    def test_reference_values(self):
        assert bessel_k(1, 1.0) == pytest.approx(0.6019072301972346, rel=1e-12)
        assert bessel_k(2, 1.0) == pytest.approx(1.6248388986351774, rel=1e-12)

    def test_domain(self):
        with pytest.raises(DomainError):
            bessel_k(3, 1.0)
        with pytest.raises(DomainError):
            bessel_k(1, 0.0)
        with pytest.raises(DomainError):
            bessel_k(1, 800.0)

    def test_scaled_beyond_underflow(self):
        """exp(x) K_1(x) ~ sqrt(pi / 2x) stays finite past the underflow limit"""
        x = 1000.0
        assert bessel_k_scaled(1, x) == pytest.approx(math.sqrt(math.pi / (2.0 * x)), rel=1e-3)


class TestRootsAndDerivatives:
    def test_sqrt2(self):
        roots = find_roots_bracketed(lambda x: x * x - 2.0, 0.0, 2.0)
        assert roots == pytest.approx([math.sqrt(2.0)], rel=1e-12)

    def test_sine_roots(self):
        roots = find_roots_bracketed(math.sin, 1.0, 7.0)
        assert roots == pytest.approx([math.pi, 2.0 * math.pi], rel=1e-12)

    def test_no_sign_change(self):
        assert find_roots_bracketed(lambda x: x * x + 1.0, -1.0, 1.0) == []

    def test_dispersion_root_against_grid(self, material):
        """Root of Omega_s(k) - k v = const against a dense grid"""
        v = 3.0 * material.beta
        target = 0.2 * material.omega_p
        f = lambda k: float(doppler(k, 0.0, v, material)) - target  # noqa: E731
        k_max = 10.0 * material.omega_p / material.beta
        roots = find_roots_bracketed(f, 0.0, k_max, grid_n=200)
        values = np.array([f(k) for k in np.linspace(0.0, k_max, 2001)])
        assert len(roots) == int(np.count_nonzero(np.diff(np.sign(values))))
        for root in roots:
            assert abs(f(root)) < 1e-6 * material.omega_p

    def test_central_diff_quadratic_exact(self):
        assert central_diff(lambda x: x * x, 3.0, 0.5) == pytest.approx(6.0, rel=1e-14)

    def test_central_diff_sine(self):
        assert central_diff(math.sin, 0.0) == pytest.approx(1.0, rel=1e-9)

    def test_central_diff_exp(self):
        assert central_diff(math.exp, 1.0, 1e-4) == pytest.approx(math.e, abs=1e-8)

    def test_gauss_legendre(self):
        x, w = gauss_legendre(16, 0.0, math.pi)
        assert float(np.sum(w * np.sin(x))) == pytest.approx(2.0, rel=1e-14)
