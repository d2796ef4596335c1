"""
Fourth-order observables: ground-state decay rate and level shift of the moving
atom, the two-photon emission channel, and the assembled fourth-order force

    F4(t) = -gamma_g t F2 - (d gamma_g / dv) delta_omega_g + F4_two_photon

Forces are in newtons with F2 the friction magnitude; gamma_g in 1/s and
delta_omega_g in rad/s. Every channel closes for u = v/beta <= 1.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from hydrofriction.dispersion import (
    BAND_BOTTOM,
    HBAR,
    AtomParams,
    Kinematics,
    MaterialParams,
    k_of_w,
    reduced_k,
    reduced_negative_onset,
    reduced_omega_s,
    reduced_omega_s_slope,
    to_dimensionless,
)
from hydrofriction.errors import DomainError, ValidityError
from hydrofriction.friction2 import ThresholdReport, force2_raw, threshold_integral, threshold_w0
from hydrofriction.numerics import (
    DEFAULT_SPEC,
    NESTED_SPEC,
    ZERO_RESULT,
    QuadratureResult,
    QuadratureSpec,
    central_diff,
    gauss_legendre,
    integrate_adaptive,
    integrate_semi_infinite,
    integrate_sqrt_endpoint,
    require_converged,
)

logger = logging.getLogger(__name__)

# Width of the real intermediate-state poles in the two-photon bracket [omega_p]
DEFAULT_RESONANCE_WIDTH = 5e-2
# Largest reduced frequency scanned when testing two-photon feasibility
DEFAULT_RESONANCE_W_MAX = 50.0
# On-shell Jacobians below this (reduced units) sit on a stationary point of omega'_2
STATIONARY_JACOBIAN = 1e-10
# Relative step of the velocity derivative of gamma_g
VELOCITY_STEP = 1e-4

DERIVATIVE_MODES = ("rate", "product")


@dataclass(frozen=True)
class RateResult:
    """A rate or frequency with its quadrature diagnostics."""

    value: float
    quadrature: QuadratureResult
    threshold: ThresholdReport | None = None

    @property
    def converged(self) -> bool:
        return self.quadrature.converged


@dataclass(frozen=True)
class DecayShiftResult:
    gamma_g: float
    delta_omega_g: float
    diagnostics: dict[str, QuadratureResult] = field(default_factory=dict)


@dataclass(frozen=True)
class ResonanceReport:
    feasible: bool
    grid_min: float
    argmin: tuple[float, float, float, float]

    def to_dict(self) -> dict:
        return {"feasible": self.feasible, "grid_min": self.grid_min, "argmin": list(self.argmin)}


@dataclass(frozen=True)
class TwoPhotonResult:
    value: float
    quadrature: QuadratureResult
    feasible: bool
    stationary_points: int = 0
    resonance_width: float = DEFAULT_RESONANCE_WIDTH


@dataclass(frozen=True)
class Force4Result:
    """Fourth-order force terms [N].

    The secular term grows linearly in t and is stored as a rate; the shift and
    two-photon terms are time independent.
    """

    t: float
    secular_rate: float
    shift_term: float
    two_photon_term: float
    gamma_g: float
    delta_omega_g: float
    dgamma_dv: float
    derivative_mode: str = "rate"
    diagnostics: dict[str, QuadratureResult] = field(default_factory=dict)
    # two-photon nodes dropped where omega'_2 is stationary in kappa_2
    stationary_points: int = 0

    @property
    def secular_term(self) -> float:
        return self.secular_rate * self.t

    def total(self, t: float | None = None) -> float:
        t = self.t if t is None else t
        return self.secular_rate * t + self.shift_term + self.two_photon_term

    @property
    def converged(self) -> bool:
        return all(r.converged for r in self.diagnostics.values())

    def to_dict(self) -> dict:
        return {
            "t_s": self.t,
            "secular_term_N": self.secular_term,
            "secular_rate_N_per_s": self.secular_rate,
            "shift_term_N": self.shift_term,
            "two_photon_term_N": self.two_photon_term,
            "total_N": self.total(),
            "gamma_g_per_s": self.gamma_g,
            "delta_omega_g_rad_per_s": self.delta_omega_g,
            "dgamma_dv": self.dgamma_dv,
            "derivative_mode": self.derivative_mode,
            "converged": self.converged,
            "stationary_points": self.stationary_points,
        }


# ---------------------------------------------------------------------------
# Decay rate and level shift
# ---------------------------------------------------------------------------


def gamma_g(
    m: MaterialParams,
    a: AtomParams,
    kin: Kinematics,
    spec: QuadratureSpec = DEFAULT_SPEC,
    strict: bool = False,
) -> RateResult:
    """Ground-state decay rate from single-photon emission [1/s].

    gamma_g = 2 pi d^2 sum_eta int d^2k |eta.k|^2 phi_k^2 exp(-2kz) delta(omega_b + omega'_k).
    The angular delta and the change k -> w leave
    gamma_g = d^2 omega_p^3 omega~ / (2 beta^3) int_{w0}^inf dw exp(-(2w - 1/w) z~) (2w^2 - 1)^2 / (w^4 sqrt(R)).

    Raises:
        ConvergenceError: strict is set and the quadrature did not converge
    """
    m.require_dispersive()
    point = to_dimensionless(m, a, kin)
    if point.u <= 1.0:
        return RateResult(value=0.0, quadrature=ZERO_RESULT, threshold=ThresholdReport(False))

    def numerator(w: float) -> float:
        return (2.0 * w * w - 1.0) ** 2 / w**4

    integral, report = threshold_integral(point, numerator, spec)
    if strict:
        require_converged(integral, "gamma_g")
    prefactor = a.d_squared * m.omega_p**3 * point.omega_tilde / (2.0 * m.beta**3)
    return RateResult(
        value=prefactor * integral.value,
        quadrature=integral.scaled(prefactor),
        threshold=report,
    )


def angular_resolvent(a_red: float, b_red: float) -> float:
    """PV of the integral of 1/(a - b cos(theta)) over [0, 2pi], for a > 0 and b >= 0.

    2 pi / sqrt(a^2 - b^2) without a pole (a > b). With a pole inside the turn
    (b >= a) the two sides cancel and the principal value is exactly zero.
    """
    if b_red >= a_red:
        return 0.0
    return 2.0 * math.pi / math.sqrt((a_red - b_red) * (a_red + b_red))


def delta_omega_g(
    m: MaterialParams,
    a: AtomParams,
    kin: Kinematics,
    spec: QuadratureSpec = DEFAULT_SPEC,
    strict: bool = False,
) -> RateResult:
    """Velocity-dependent ground-state level shift [rad/s].

    delta_omega_g = -d^2 PV int d^2k 2k^2 phi_k^2 exp(-2kz) / (omega_b + omega'_k), written as
    -(d^2 omega_p^3 / (8 beta^3)) int dw (2w^2-1)^2 exp(-(2w - 1/w) z~) / w^5 * T(w) / (2 pi)
    with T = angular_resolvent(1/omega~ + w, u kappa(w)). Since kappa = (2w^2 - 1)/(2w),
    T / (2 pi) = 2 w omega~ / sqrt(-R(w)) with R the threshold radicand, and T = 0
    past w0. Above threshold the range therefore ends at w0 with an
    inverse-square-root singularity from below.
    """
    m.require_dispersive()
    point = to_dimensionless(m, a, kin)
    u, ot, zt = point.u, point.omega_tilde, point.z_tilde

    def integrand(w: float) -> float:
        s = 2.0 * w * w - 1.0
        c = 2.0 * w * (1.0 + ot * w)
        gap = c * c - (s * u * ot) ** 2
        if gap <= 0.0:
            return 0.0
        return 2.0 * ot * s * s * math.exp(-(2.0 * w - 1.0 / w) * zt) / (w**4 * math.sqrt(gap))

    decay = 1.0 / (2.0 * zt)
    report = threshold_w0(u, ot) if u > 0 else ThresholdReport(False)
    if report.supersonic:
        # only the last unit below w0 goes through the sqrt substitution
        split = max(BAND_BOTTOM, report.w0 - 1.0)
        peak = [BAND_BOTTOM + decay * n for n in (1.0, 4.0, 16.0, 64.0)]
        regular = integrate_adaptive(integrand, BAND_BOTTOM, split, spec, points=peak)
        near = integrate_sqrt_endpoint(integrand, report.w0, split, spec)
        total = regular + near
    else:
        total = integrate_semi_infinite(integrand, BAND_BOTTOM, decay, spec)
    if strict:
        require_converged(total, "delta_omega_g")

    prefactor = -a.d_squared * m.omega_p**3 / (8.0 * m.beta**3)
    return RateResult(value=prefactor * total.value, quadrature=total.scaled(prefactor), threshold=report)


def decay_and_shift(
    m: MaterialParams,
    a: AtomParams,
    kin: Kinematics,
    spec: QuadratureSpec = DEFAULT_SPEC,
    strict: bool = False,
) -> DecayShiftResult:
    g = gamma_g(m, a, kin, spec, strict=strict)
    s = delta_omega_g(m, a, kin, spec, strict=strict)
    return DecayShiftResult(
        gamma_g=g.value,
        delta_omega_g=s.value,
        diagnostics={"gamma_g": g.quadrature, "delta_omega_g": s.quadrature},
    )


# ---------------------------------------------------------------------------
# Two-photon channel
# ---------------------------------------------------------------------------


def _comoving(w, u: float):
    """omega' / omega_p at theta = 0 as a function of w."""
    return w - u * reduced_k(w)


def resonance_min(
    m: MaterialParams,
    kin: Kinematics,
    grid_n: int = 400,
    w_max: float = DEFAULT_RESONANCE_W_MAX,
) -> ResonanceReport:
    """Minimum of omega'_1 + omega'_2 over the two-photon domain [rad/s].

    Both photons are co-moving (theta_i = 0) at the minimum, so the scan runs over
    a grid_n x grid_n grid in (w1, w2) on [1/sqrt(2), w_max], followed by a bounded
    local refinement from the best grid node.
    """
    m.require_dispersive()
    u = kin.v / m.beta
    w = np.linspace(BAND_BOTTOM, w_max, grid_n)
    single = _comoving(w, u)
    total = single[:, None] + single[None, :]
    i, j = np.unravel_index(int(np.argmin(total)), total.shape)
    best = float(total[i, j])
    best_w = (float(w[i]), float(w[j]))

    refined = optimize.minimize(
        lambda x: float(_comoving(x[0], u) + _comoving(x[1], u)),
        x0=np.array(best_w),
        bounds=[(BAND_BOTTOM, w_max)] * 2,
        method="L-BFGS-B",
    )
    if refined.success and refined.fun < best:
        best = float(refined.fun)
        best_w = (float(refined.x[0]), float(refined.x[1]))

    grid_min = best * m.omega_p
    feasible = grid_min <= 1e-12 * m.omega_p
    k1, k2 = (float(k_of_w(wi, m)) for wi in best_w)
    logger.debug(f"two-photon resonance u={u:.6g}: min omega'_1+omega'_2 = {grid_min:.6e} rad/s")
    return ResonanceReport(feasible=feasible, grid_min=grid_min, argmin=(k1, 0.0, k2, 0.0))


def two_photon_roots(target, cos2, u: float):
    """Roots kappa_2 >= 0 of W(kappa_2) - u kappa_2 cos2 = target.

    The left side is convex in kappa_2, so there are at most two roots; squaring
    (1/2) sqrt(2 + kappa^2) = target - A kappa with A = 1/2 - u cos2 gives a quadratic.
    Works elementwise on arrays and returns (root_lo, root_hi) with NaN where absent.
    """
    target = np.asarray(target, dtype=float)
    cos2 = np.asarray(cos2, dtype=float)
    big_a = 0.5 - u * cos2
    qa = big_a * big_a - 0.25
    qb = -2.0 * big_a * target
    qc = target * target - 0.5
    with np.errstate(divide="ignore", invalid="ignore"):
        disc = qb * qb - 4.0 * qa * qc
        sq = np.sqrt(np.where(disc >= 0.0, disc, np.nan))
        quad_lo = (-qb - sq) / (2.0 * qa)
        quad_hi = (-qb + sq) / (2.0 * qa)
        linear = np.where(qb != 0.0, -qc / qb, np.nan)
        degenerate = np.abs(qa) < 1e-14
        r1 = np.where(degenerate, linear, quad_lo)
        r2 = np.where(degenerate, np.nan, quad_hi)

        def keep(r):
            ok = (r >= 0.0) & (target - big_a * r >= 0.0)
            return np.where(ok, r, np.nan)

        r1, r2 = keep(r1), keep(r2)
        both = np.isfinite(r1) & np.isfinite(r2)
        distinct = both & ~np.isclose(r1, r2, rtol=1e-14, atol=0.0)
        lo = np.fmin(r1, r2)
        hi = np.where(distinct, np.fmax(r1, r2), np.nan)
    return lo, hi


def two_photon_kernel(k1, theta1, k2, theta2, u: float, omega_tilde: float, z_tilde: float,
                      width: float = DEFAULT_RESONANCE_WIDTH):
    """Reduced two-photon integrand without the energy delta function.

    kappa_1^2 kappa_2^2 (1 - cos(theta1 - theta2))^2 (kappa_1 cos theta1 + kappa_2 cos theta2)
    exp(-2 z~ (kappa_1 + kappa_2)) |1/(1/omega~ + w'_1 - i width) + 1/(1/omega~ + w'_2 - i width)|^2
    / [W1 (1 + 2 W1^2) W2 (1 + 2 W2^2)], symmetric under photon exchange.
    """
    k1, k2 = np.asarray(k1, dtype=float), np.asarray(k2, dtype=float)
    c1, c2 = np.cos(theta1), np.cos(theta2)
    w1, w2 = reduced_omega_s(k1), reduced_omega_s(k2)
    p1 = w1 - u * k1 * c1
    p2 = w2 - u * k2 * c2
    inv_b = 1.0 / omega_tilde
    bracket = 1.0 / (inv_b + p1 - 1j * width) + 1.0 / (inv_b + p2 - 1j * width)
    geometry = (1.0 - np.cos(theta1 - theta2)) ** 2
    return (
        (k1 * k2) ** 2 * geometry * (k1 * c1 + k2 * c2)
        * np.exp(-2.0 * z_tilde * (k1 + k2))
        * np.abs(bracket) ** 2
        / (w1 * (1.0 + 2.0 * w1 * w1) * w2 * (1.0 + 2.0 * w2 * w2))
    )


def _angular_slab(kappa1: float, u: float, ot: float, zt: float, width: float,
                  theta1: np.ndarray, wt1: np.ndarray, theta2: np.ndarray, wt2: np.ndarray,
                  shift: float) -> tuple[float, int]:
    """Integral over (theta1, theta2) of the on-shell kernel at fixed kappa_1."""
    t1 = theta1[:, None]
    t2 = theta2[None, :]
    c2 = np.cos(t2)
    target = -(reduced_omega_s(kappa1) - u * kappa1 * np.cos(t1))
    target = np.broadcast_to(target, (theta1.size, theta2.size))
    c2b = np.broadcast_to(c2, target.shape)
    weights = wt1[:, None] * wt2[None, :]

    total = 0.0
    stationary = 0
    for root in two_photon_roots(target, c2b, u):
        valid = np.isfinite(root)
        if not np.any(valid):
            continue
        k2 = np.where(valid, root, 0.0)
        jac = np.abs(reduced_omega_s_slope(k2) - u * c2b)
        flat = valid & (jac < STATIONARY_JACOBIAN)
        stationary += int(np.count_nonzero(flat))
        use = valid & ~flat
        kernel = two_photon_kernel(kappa1, t1, k2, t2, u, ot, zt, width)
        contrib = np.where(use, kernel * math.exp(shift) / np.where(use, jac, 1.0), 0.0)
        total += float(np.sum(contrib * weights))
    return total, stationary


def force4_two_photon(
    m: MaterialParams,
    a: AtomParams,
    kin: Kinematics,
    spec: QuadratureSpec = NESTED_SPEC,
    resonance_width: float = DEFAULT_RESONANCE_WIDTH,
    n_theta: int = 192,
    use_symmetry: bool = True,
) -> TwoPhotonResult:
    """Two-photon contribution to the fourth-order force [N].

    F = -pi d^4 int d^2k1 d^2k2 |k1.k2|^2 phi_1^2 phi_2^2 exp(-2(k1 + k2) z)
        delta(omega'_1 + omega'_2) (k1 cos theta1 + k2 cos theta2) B^2
    with |k1.k2|^2 = k1^2 k2^2 (1 - cos(theta1 - theta2))^2. The delta is resolved in
    kappa_2 through two_photon_roots; the angles run on a Gauss-Legendre product grid
    and kappa_1 on an adaptive rule. In reduced units
    F = -hbar d^4 omega_p^6 / (16 pi beta^7) * I.

    Args:
        resonance_width: width of the bracket's real intermediate-state poles [omega_p]
        n_theta: Gauss-Legendre nodes per angle
        use_symmetry: integrate theta1 over [0, pi] and double, using the
            (theta1, theta2) -> (-theta1, -theta2) reflection
    """
    m.require_dispersive()
    point = to_dimensionless(m, a, kin)
    resonance = resonance_min(m, kin, grid_n=200)
    if point.u <= 1.0 or not resonance.feasible:
        return TwoPhotonResult(value=0.0, quadrature=ZERO_RESULT, feasible=False,
                               resonance_width=resonance_width)

    u, ot, zt = point.u, point.omega_tilde, point.z_tilde
    if use_symmetry:
        theta1, wt1 = gauss_legendre(n_theta, 0.0, math.pi)
        wt1 = 2.0 * wt1
    else:
        theta1, wt1 = gauss_legendre(2 * n_theta, -math.pi, math.pi)
    theta2, wt2 = gauss_legendre(2 * n_theta, -math.pi, math.pi)

    # exp(-2 z~ (kappa1 + kappa2)) never exceeds exp(-2 z~ kappa_th) on shell
    shift = 2.0 * zt * reduced_negative_onset(u)
    stationary = 0

    def slab(kappa1: float) -> float:
        nonlocal stationary
        value, flat = _angular_slab(kappa1, u, ot, zt, resonance_width,
                                    theta1, wt1, theta2, wt2, shift)
        stationary += flat
        return value

    integral = integrate_semi_infinite(slab, 0.0, 1.0 / (2.0 * zt), spec)
    if stationary:
        logger.warning(f"two-photon integrand: {stationary} nodes on stationary points of omega'_2 skipped")

    prefactor = -HBAR * a.d_squared**2 * m.omega_p**6 / (16.0 * math.pi * m.beta**7) * math.exp(-shift)
    return TwoPhotonResult(
        value=prefactor * integral.value,
        quadrature=integral.scaled(prefactor),
        feasible=True,
        stationary_points=stationary,
        resonance_width=resonance_width,
    )


# ---------------------------------------------------------------------------
# Assembly
# ---------------------------------------------------------------------------


def force4_assemble(
    m: MaterialParams,
    a: AtomParams,
    kin: Kinematics,
    t: float,
    spec: QuadratureSpec = DEFAULT_SPEC,
    derivative: str = "rate",
    include_two_photon: bool = True,
    resonance_width: float = DEFAULT_RESONANCE_WIDTH,
) -> Force4Result:
    """Assemble the fourth-order force at time t.

    Args:
        t: Time since the motion started [s], t >= 0 and t gamma_g < 1
        derivative: "rate" differentiates gamma_g alone, (d gamma_g/dv) delta_omega_g;
            "product" differentiates gamma_g delta_omega_g as a whole
        include_two_photon: skip the (slow) two-photon channel when False

    Raises:
        ValidityError: t gamma_g >= 1, where the secular term dominates
    """
    if not t >= 0:
        raise DomainError(f"t must be non-negative, got {t}")
    if derivative not in DERIVATIVE_MODES:
        raise DomainError(f"derivative must be one of {DERIVATIVE_MODES}, got {derivative!r}")
    m.require_dispersive()
    u = kin.v / m.beta
    if u <= 1.0:
        return Force4Result(t=t, secular_rate=0.0, shift_term=0.0, two_photon_term=0.0,
                            gamma_g=0.0, delta_omega_g=0.0, dgamma_dv=0.0, derivative_mode=derivative)

    f2 = force2_raw(m, a, kin, spec)
    g = gamma_g(m, a, kin, spec)
    if t * g.value >= 1.0:
        raise ValidityError(
            f"t gamma_g = {t * g.value:.3g} >= 1: the secular term dominates, perturbation theory fails"
        )
    s = delta_omega_g(m, a, kin, spec)

    h = VELOCITY_STEP * kin.v

    def rate_at(v: float) -> float:
        return gamma_g(m, a, kin.with_speed(v), spec).value

    dgdv = central_diff(rate_at, kin.v, h)
    if derivative == "rate":
        shift_term = -HBAR * dgdv * s.value
    else:
        shift_term = -HBAR * central_diff(
            lambda v: rate_at(v) * delta_omega_g(m, a, kin.with_speed(v), spec).value, kin.v, h
        )

    diagnostics = {"force2": f2.quadrature, "gamma_g": g.quadrature, "delta_omega_g": s.quadrature}
    two_photon = 0.0
    stationary = 0
    if include_two_photon:
        tp = force4_two_photon(m, a, kin, resonance_width=resonance_width)
        two_photon = tp.value
        stationary = tp.stationary_points
        diagnostics["two_photon"] = tp.quadrature

    return Force4Result(
        t=t,
        secular_rate=-g.value * f2.raw_value,
        shift_term=shift_term,
        two_photon_term=two_photon,
        gamma_g=g.value,
        delta_omega_g=s.value,
        dgamma_dv=dgdv,
        derivative_mode=derivative,
        diagnostics=diagnostics,
        stationary_points=stationary,
    )
