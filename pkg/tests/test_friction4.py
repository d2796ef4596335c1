#!/usr/bin/env python3
"""
Tests for the fourth-order observables: decay rate, level shift, two-photon
channel and the assembled force.
"""

import math
import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import hydrofriction.friction4 as friction4
from hydrofriction.dispersion import BAND_BOTTOM, HBAR, Kinematics, MaterialParams, reduced_k, reduced_omega_s
from hydrofriction.errors import ConvergenceError, DomainError, ValidityError
from hydrofriction.friction2 import ThresholdReport, force2_raw, threshold_w0
from hydrofriction.friction4 import (
    Force4Result,
    _angular_slab,
    angular_resolvent,
    decay_and_shift,
    delta_omega_g,
    force4_assemble,
    force4_two_photon,
    gamma_g,
    resonance_min,
    two_photon_kernel,
    two_photon_roots,
)
from hydrofriction.numerics import (
    QuadratureResult,
    central_diff,
    find_roots_bracketed,
    gauss_legendre,
    integrate_sqrt_endpoint,
    principal_value_1d,
)
from tests.conftest import OMEGA_P, reduced


class TestDecayRate:
    """Single-photon decay of the ground state"""

    def test_zero_below_threshold(self):
        """100 random tuples with u in (0, 1] decay at exactly zero rate"""
        rng = np.random.default_rng(21)
        for _ in range(100):
            m, a, kin = reduced(float(rng.uniform(1e-6, 1.0)), float(10 ** rng.uniform(-1, 1)),
                                float(10 ** rng.uniform(0, 3)))
            result = gamma_g(m, a, kin)
            assert result.value == 0.0
            assert result.quadrature.evaluations == 0

    def test_positive_above_threshold(self, reference_point):
        result = gamma_g(*reference_point)
        assert result.value > 0
        assert result.converged
        assert result.threshold.supersonic

    def test_linear_in_polarizability(self):
        """gamma_g ~ d^2 ~ alpha"""
        one = gamma_g(*reduced(5.0, alpha=1e-30)).value
        two = gamma_g(*reduced(5.0, alpha=2e-30)).value
        assert two / one == pytest.approx(2.0, rel=1e-12)

    def test_grows_past_threshold(self):
        """More phase space opens as v rises just above beta"""
        m, a, kin = reduced(2.0)
        assert central_diff(lambda v: gamma_g(m, a, kin.with_speed(v)).value, kin.v, 1e-4 * kin.v) > 0

    def test_requires_dispersion(self, atom, supersonic):
        with pytest.raises(DomainError):
            gamma_g(MaterialParams(OMEGA_P, 0.0), atom, supersonic)

    def test_strict_raises_on_unconverged(self, reference_point, monkeypatch):
        bad = QuadratureResult(1.0, 1.0, 10, False)
        monkeypatch.setattr(
            friction4, "threshold_integral", lambda point, numerator, spec: (bad, ThresholdReport(True, 1.2))
        )
        assert not gamma_g(*reference_point).converged
        with pytest.raises(ConvergenceError):
            gamma_g(*reference_point, strict=True)


class TestAngularResolvent:
    """Integral of 1/(a - b cos theta) over a full turn"""

    @pytest.mark.parametrize("a, b", [(2.0, 1.0), (1.0, 0.0), (5.0, 4.9), (1.7, 0.3)])
    def test_matches_periodic_sum(self, a, b):
        theta = np.linspace(0.0, 2.0 * math.pi, 20000, endpoint=False)
        expected = 2.0 * math.pi * np.mean(1.0 / (a - b * np.cos(theta)))
        assert angular_resolvent(a, b) == pytest.approx(expected, rel=1e-9)

    @pytest.mark.parametrize("a, b", [(1.0, 2.0), (0.5, 3.0), (1.0, 1.0), (1.0, 1.0 + 1e-10)])
    def test_principal_value_vanishes(self, a, b):
        """With a pole inside the turn the principal value is zero"""
        assert angular_resolvent(a, b) == 0.0

    def test_finite_just_below_pole(self):
        assert math.isfinite(angular_resolvent(1.0, 1.0 - 1e-12))

    @pytest.mark.parametrize("a, b", [(1.0, 2.0), (0.5, 3.0)])
    def test_agrees_with_excised_principal_value(self, a, b):
        """The half turn [0, pi] holds one pole; its excised principal value is already zero"""
        pole = math.acos(a / b)
        half = principal_value_1d(lambda t: 1.0 / (a - b * math.cos(t)), pole, 0.0, math.pi)
        assert 2.0 * half.value == pytest.approx(angular_resolvent(a, b), abs=1e-6)


class TestLevelShift:
    """Velocity-dependent shift of the ground state"""

    def test_negative_at_rest(self, material, atom):
        assert delta_omega_g(material, atom, Kinematics(v=0.0, z=10e-9)).value < 0

    def test_weakens_with_distance(self, material, atom):
        shifts = [abs(delta_omega_g(material, atom, Kinematics(v=0.0, z=z)).value) for z in (5e-9, 10e-9, 20e-9)]
        assert shifts[0] > shifts[1] > shifts[2]

    def test_continuous_across_threshold(self):
        below = delta_omega_g(*reduced(0.95)).value
        above = delta_omega_g(*reduced(1.05)).value
        assert above == pytest.approx(below, rel=1e-2)

    @pytest.mark.parametrize("offset, rel", [(1e-3, 1e-2), (1e-6, 1e-4), (1e-9, 1e-6)])
    def test_continuous_just_past_threshold(self, offset, rel):
        """w0 runs off to infinity as u -> 1+; the shift must not notice"""
        below = delta_omega_g(*reduced(1.0 - offset))
        above = delta_omega_g(*reduced(1.0 + offset))
        assert above.converged and below.converged
        assert above.value == pytest.approx(below.value, rel=rel)

    def test_matches_angular_form(self, reference_point):
        """Polynomial radicand form agrees with the angular resolvent written out"""
        m, a, kin = reference_point
        u, ot, zt = 5.0, 1.0, 10.0
        w0 = threshold_w0(u, ot).w0

        def integrand(w):
            t = angular_resolvent(1.0 / ot + w, u * float(reduced_k(w)))
            return (2.0 * w * w - 1.0) ** 2 * math.exp(-(2.0 * w - 1.0 / w) * zt) / w**5 * t / (2.0 * math.pi)

        reference = integrate_sqrt_endpoint(integrand, w0, BAND_BOTTOM).value
        reference *= -a.d_squared * m.omega_p**3 / (8.0 * m.beta**3)
        assert delta_omega_g(m, a, kin).value == pytest.approx(reference, rel=1e-6)

    def test_supersonic_reports_threshold(self, reference_point):
        result = delta_omega_g(*reference_point)
        assert result.threshold.supersonic
        assert math.isfinite(result.value)

    def test_decay_and_shift(self, reference_point):
        both = decay_and_shift(*reference_point)
        assert both.gamma_g == pytest.approx(gamma_g(*reference_point).value, rel=1e-14)
        assert both.delta_omega_g == pytest.approx(delta_omega_g(*reference_point).value, rel=1e-14)
        assert set(both.diagnostics) == {"gamma_g", "delta_omega_g"}


class TestResonanceMin:
    """Feasibility of omega'_1 + omega'_2 = 0"""

    @pytest.mark.parametrize("u", [0.5, 0.9, 0.99])
    def test_subsonic_bound(self, material, u):
        """Below beta the sum stays at or above 2 sqrt(2 u (1 - u)) omega_p > 0"""
        report = resonance_min(material, Kinematics(v=u * material.beta, z=10e-9))
        exact = 2.0 * math.sqrt(2.0 * u * (1.0 - u)) * material.omega_p
        assert not report.feasible
        assert report.grid_min >= exact * (1.0 - 1e-12)
        assert report.grid_min == pytest.approx(exact, rel=1e-5)
        assert report.grid_min >= math.sqrt(2.0) * (1.0 - u) * material.omega_p

    def test_at_rest(self, material):
        report = resonance_min(material, Kinematics(v=0.0, z=10e-9))
        assert report.grid_min == pytest.approx(math.sqrt(2.0) * material.omega_p, rel=1e-12)

    def test_supersonic_feasible(self, material):
        report = resonance_min(material, Kinematics(v=3.0 * material.beta, z=10e-9))
        assert report.feasible
        assert report.grid_min < 0
        assert report.to_dict()["feasible"] is True


class TestTwoPhotonRoots:
    """On-shell wavenumber of the second photon"""

    U = 3.0

    @pytest.mark.parametrize(
        "target, cos2, count",
        [(0.70, 0.2, 2), (0.8, 0.2, 1), (0.6, 0.2, 0), (-0.5, 1.0, 1), (0.3, -0.5, 0)],
    )
    def test_against_bracketing(self, target, cos2, count):
        lo, hi = two_photon_roots(target, cos2, self.U)
        found = [float(r) for r in (lo, hi) if np.isfinite(r)]
        expected = find_roots_bracketed(
            lambda k: float(reduced_omega_s(k)) - self.U * k * cos2 - target, 0.0, 50.0, grid_n=5000
        )
        assert len(found) == count
        assert len(expected) == count
        assert found == pytest.approx(expected, rel=1e-9)

    def test_vectorized(self):
        lo, hi = two_photon_roots(np.array([0.70, 0.8, 0.6]), np.array([0.2, 0.2, 0.2]), self.U)
        assert lo.shape == (3,)
        assert np.isfinite(lo[:2]).all() and np.isnan(lo[2])
        assert np.isfinite(hi[0]) and np.isnan(hi[1:]).all()


class TestTwoPhotonKernel:
    def test_exchange_symmetry(self):
        rng = np.random.default_rng(22)
        k1, k2 = rng.uniform(0.01, 2.0, 200), rng.uniform(0.01, 2.0, 200)
        t1, t2 = rng.uniform(-math.pi, math.pi, 200), rng.uniform(-math.pi, math.pi, 200)
        a = two_photon_kernel(k1, t1, k2, t2, 3.0, 1.0, 10.0)
        b = two_photon_kernel(k2, t2, k1, t1, 3.0, 1.0, 10.0)
        np.testing.assert_allclose(a, b, rtol=1e-13)

    def test_reflection_symmetry(self):
        """(theta1, theta2) -> (-theta1, -theta2) leaves the kernel unchanged"""
        a = two_photon_kernel(0.4, 0.3, 0.9, -2.1, 3.0, 1.0, 10.0)
        b = two_photon_kernel(0.4, -0.3, 0.9, 2.1, 3.0, 1.0, 10.0)
        assert float(a) == pytest.approx(float(b), rel=1e-14)

    def test_parallel_photons_decouple(self):
        assert float(two_photon_kernel(0.4, 0.7, 0.9, 0.7, 3.0, 1.0, 10.0)) == 0.0

    def test_slab_reflection(self):
        """The angular slab is even in theta1, so the half range can be doubled"""
        theta2, wt2 = gauss_legendre(64, -math.pi, math.pi)
        theta1 = np.array([0.3, 1.1, 2.5])
        wt1 = np.ones(3)
        args = (3.0, 1.0, 10.0, 5e-2)
        plus, _ = _angular_slab(0.5, *args, theta1, wt1, theta2, wt2, 0.0)
        minus, _ = _angular_slab(0.5, *args, -theta1, wt1, theta2, wt2, 0.0)
        assert plus == pytest.approx(minus, rel=1e-10)


class TestTwoPhotonForce:
    def test_closed_below_threshold(self, material, atom, subsonic):
        result = force4_two_photon(material, atom, subsonic)
        assert result.value == 0.0
        assert not result.feasible

    @pytest.mark.slow
    def test_open_above_threshold(self):
        result = force4_two_photon(*reduced(3.0), n_theta=32)
        assert result.feasible
        assert math.isfinite(result.value)
        assert result.resonance_width == pytest.approx(5e-2)

    @pytest.mark.slow
    def test_reflection_halves_theta1(self):
        """theta1 over [0, pi] doubled matches the full [-pi, pi] turn"""
        point = reduced(3.0)
        half = force4_two_photon(*point, n_theta=48, use_symmetry=True)
        full = force4_two_photon(*point, n_theta=48, use_symmetry=False)
        assert half.feasible and full.feasible
        assert half.value != 0.0
        assert half.value == pytest.approx(full.value, rel=2e-2)


class TestAssembly:
    """F4(t) = -gamma_g t F2 - (d gamma_g/dv) delta_omega_g + F4_two_photon"""

    def test_zero_below_threshold(self, material, atom, subsonic):
        result = force4_assemble(material, atom, subsonic, t=1e-12)
        assert result.total() == 0.0
        assert result.secular_rate == 0.0 and result.gamma_g == 0.0

    def test_secular_rate(self, reference_point):
        result = force4_assemble(*reference_point, t=0.0, include_two_photon=False)
        f2 = force2_raw(*reference_point).raw_value
        assert result.secular_rate == pytest.approx(-result.gamma_g * f2, rel=1e-12)
        assert result.secular_term == 0.0
        assert result.total() == pytest.approx(result.shift_term, rel=1e-14)

    def test_linear_in_time(self, reference_point):
        result = force4_assemble(*reference_point, t=0.0, include_two_photon=False)
        t1, t2 = 0.1 / result.gamma_g, 0.3 / result.gamma_g
        assert result.total(t2) - result.total(t1) == pytest.approx(result.secular_rate * (t2 - t1), rel=1e-9)

    def test_secular_breakdown(self, reference_point):
        rate = gamma_g(*reference_point).value
        with pytest.raises(ValidityError):
            force4_assemble(*reference_point, t=2.0 / rate, include_two_photon=False)

    def test_invalid_arguments(self, reference_point):
        with pytest.raises(DomainError):
            force4_assemble(*reference_point, t=-1.0)
        with pytest.raises(DomainError):
            force4_assemble(*reference_point, t=0.0, derivative="chain")

    def test_to_dict(self, reference_point):
        record = force4_assemble(*reference_point, t=0.0, include_two_photon=False).to_dict()
        assert record["two_photon_term_N"] == 0.0
        assert record["derivative_mode"] == "rate"
        assert set(record) >= {"total_N", "secular_term_N", "shift_term_N", "gamma_g_per_s", "converged"}

    def test_stationary_points_reported(self, reference_point, monkeypatch):
        channel = friction4.TwoPhotonResult(value=-1e-30, quadrature=QuadratureResult(-1e-30), feasible=True,
                                            stationary_points=7)
        monkeypatch.setattr(friction4, "force4_two_photon", lambda *args, **kwargs: channel)
        result = force4_assemble(*reference_point, t=0.0)
        assert result.two_photon_term == -1e-30
        assert result.stationary_points == 7
        record = result.to_dict()
        assert record["stationary_points"] == 7
        assert record["two_photon_term_N"] == -1e-30

    def test_no_stationary_points_without_channel(self, reference_point):
        record = force4_assemble(*reference_point, t=0.0, include_two_photon=False).to_dict()
        assert record["stationary_points"] == 0

    def test_result_total_override(self):
        result = Force4Result(t=1.0, secular_rate=2.0, shift_term=3.0, two_photon_term=4.0,
                              gamma_g=0.0, delta_omega_g=0.0, dgamma_dv=0.0)
        assert result.total() == 9.0
        assert result.total(0.0) == 7.0

    @pytest.mark.slow
    def test_product_derivative(self, reference_point):
        """The product rule adds gamma_g d(delta_omega_g)/dv to the rate form"""
        m, a, kin = reference_point
        rate = force4_assemble(m, a, kin, t=0.0, include_two_photon=False)
        product = force4_assemble(m, a, kin, t=0.0, derivative="product", include_two_photon=False)
        h = 1e-4 * kin.v
        dshift = central_diff(lambda v: delta_omega_g(m, a, kin.with_speed(v)).value, kin.v, h)
        expected = rate.shift_term - HBAR * rate.gamma_g * dshift
        assert product.derivative_mode == "product"
        assert product.shift_term == pytest.approx(expected, rel=1e-3)

    def test_alpha_scaling(self):
        """Secular and shift terms are fourth order in the dipole, so quadratic in alpha"""
        one = force4_assemble(*reduced(5.0, alpha=1e-30), t=0.0, include_two_photon=False)
        two = force4_assemble(*reduced(5.0, alpha=2e-30), t=0.0, include_two_photon=False)
        assert two.secular_rate / one.secular_rate == pytest.approx(4.0, rel=1e-10)
        assert two.shift_term / one.shift_term == pytest.approx(4.0, rel=1e-6)
