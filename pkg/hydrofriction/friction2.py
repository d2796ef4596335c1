"""
Second-order quantum friction on an atom above a hydrodynamic metal.

The single-photon resonance omega_b + Omega_s(k) = k v cos(theta) can only be met
for u = v/beta > 1. Above that threshold the angular delta function reduces the
force to a one-dimensional integral over the reduced surface-mode frequency w,
starting at the threshold frequency w0 where the resonance first opens.

The reported force is the friction magnitude normalized by the static
Casimir-Polder force |F_CP| = 3 hbar c alpha / (2 pi z^5); the physical force points
against the motion.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np

from hydrofriction.dispersion import (
    BAND_BOTTOM,
    C_LIGHT,
    HBAR,
    AtomParams,
    DimensionlessPoint,
    Kinematics,
    MaterialParams,
    k_of_w,
    omega_s,
    to_dimensionless,
)
from hydrofriction.errors import DomainError
from hydrofriction.numerics import (
    DEFAULT_SPEC,
    ZERO_RESULT,
    QuadratureResult,
    QuadratureSpec,
    bessel_k,
    integrate_semi_infinite,
    integrate_sqrt_endpoint,
)

logger = logging.getLogger(__name__)

# Relative size below which a negative radicand is treated as round-off
RADICAND_CLAMP = 1e-12
# u - 1 below this is treated as sitting on the threshold
MIN_SUPERSONIC_EXCESS = 1e-12


@dataclass(frozen=True)
class ThresholdReport:
    supersonic: bool
    w0: float | None = None
    h_roots: tuple[float, float] | None = None

    def to_dict(self) -> dict:
        return {"supersonic": self.supersonic, "w0": self.w0, "h_roots": self.h_roots}


@dataclass(frozen=True)
class ForceResult:
    normalized_value: float
    raw_value: float | None
    quadrature: QuadratureResult
    threshold: ThresholdReport
    point: DimensionlessPoint | None = None
    path: str = "w"
    notes: list[str] = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return self.quadrature.converged

    def to_dict(self) -> dict:
        return {
            "f2_normalized": self.normalized_value,
            "f2_raw_N": self.raw_value,
            "quadrature": self.quadrature.to_dict(),
            "threshold": self.threshold.to_dict(),
            "path": self.path,
            "notes": list(self.notes),
        }


def h_poly(w, u: float, omega_tilde: float):
    """Threshold polynomial h(w) = 2 (1 - u) w^2 + (2 / omega_tilde) w + u.

    h(w) < 0 exactly where k(w) v > omega_b + Omega_s(w), i.e. where the
    single-photon resonance is reachable.
    """
    w = np.asarray(w, dtype=float)
    return 2.0 * (1.0 - u) * w * w + (2.0 / omega_tilde) * w + u


def h_roots(u: float, omega_tilde: float) -> tuple[float, float] | None:
    """Real roots of h(w), ascending, or None when they are complex or u = 1."""
    if u == 1.0:
        return None
    disc = 1.0 + 2.0 * omega_tilde**2 * u * (u - 1.0)
    if disc < 0.0:
        return None
    sq = math.sqrt(disc)
    denom = 2.0 * omega_tilde * (1.0 - u)
    r1, r2 = (-1.0 + sq) / denom, (-1.0 - sq) / denom
    return (min(r1, r2), max(r1, r2))


def threshold_w0(u: float, omega_tilde: float) -> ThresholdReport:
    """Lower limit of the friction integral.

    For u <= 1 the resonance never opens. For u > 1, h has one positive root
    w0 = [1 + sqrt(1 + 2 omega_tilde^2 u (u - 1))] / (2 omega_tilde (u - 1)),
    which always lies above the band bottom 1/sqrt(2).
    """
    if not (u > 0 and omega_tilde > 0):
        raise DomainError(f"u and omega_tilde must be positive, got u={u}, omega_tilde={omega_tilde}")
    excess = u - 1.0
    if excess <= 0.0:
        return ThresholdReport(supersonic=False, h_roots=h_roots(u, omega_tilde))
    excess = max(excess, MIN_SUPERSONIC_EXCESS)
    w0 = (1.0 + math.sqrt(1.0 + 2.0 * omega_tilde**2 * u * excess)) / (2.0 * omega_tilde * excess)
    return ThresholdReport(supersonic=True, w0=w0, h_roots=h_roots(u, omega_tilde))


def k_threshold(m: MaterialParams, a: AtomParams, kin: Kinematics) -> float | None:
    """Smallest wavenumber [1/m] the moving atom can emit into, or None below threshold."""
    point = to_dimensionless(m, a, kin)
    report = threshold_w0(point.u, point.omega_tilde) if point.u > 0 else ThresholdReport(False)
    if not report.supersonic:
        return None
    return float(k_of_w(report.w0, m))


def resonance_cosine(k, m: MaterialParams, a: AtomParams, kin: Kinematics):
    """cos(theta*) = (omega_b + Omega_s(k)) / (k v) of the resonant emission direction.

    Values above 1 mean no direction is resonant at that k.
    """
    if not kin.v > 0:
        raise DomainError("the resonance direction needs v > 0")
    k = np.asarray(k, dtype=float)
    if np.any(k <= 0):
        raise DomainError("k must be positive")
    return (a.omega_b + omega_s(k, m)) / (k * kin.v)


def radicand(w, u: float, omega_tilde: float):
    """(2w^2 - 1)^2 u^2 omega_tilde^2 - 4 w^2 (1 + omega_tilde w)^2.

    Proportional to k^2 v^2 - (omega_b + Omega_s)^2; vanishes at w0.
    """
    w = np.asarray(w, dtype=float)
    a = (2.0 * w * w - 1.0) * u * omega_tilde
    b = 2.0 * w * (1.0 + omega_tilde * w)
    return a * a - b * b


def _exponent(w: float) -> float:
    return 2.0 * w - 1.0 / w


def threshold_integral(
    point: DimensionlessPoint,
    numerator: Callable[[float], float],
    spec: QuadratureSpec = DEFAULT_SPEC,
) -> tuple[QuadratureResult, ThresholdReport]:
    """Integral of exp(-(2w - 1/w) z~) numerator(w) / sqrt(radicand(w)) over (w0, inf).

    The shared reduction behind the second-order force and the decay rate. The
    exponential is factored at w0 so the quadrature works on O(1) values; the
    returned result carries the factor back in.

    Raises:
        DomainError: the radicand turns negative inside (w0, inf) beyond round-off
    """
    u, ot, zt = point.u, point.omega_tilde, point.z_tilde
    report = threshold_w0(u, ot)
    if not report.supersonic:
        return ZERO_RESULT, report

    w0 = report.w0
    if not w0 > BAND_BOTTOM:
        raise DomainError(f"threshold w0 = {w0} below the band bottom")
    e0 = _exponent(w0)

    def integrand(w: float) -> float:
        a = (2.0 * w * w - 1.0) * u * ot
        b = 2.0 * w * (1.0 + ot * w)
        r = a * a - b * b
        if r <= 0.0:
            if -r <= RADICAND_CLAMP * (a * a + b * b):
                return 0.0
            raise DomainError(f"negative radicand {r:.3e} at w = {w:.12g} > w0 = {w0:.12g}")
        return math.exp(-(_exponent(w) - e0) * zt) * numerator(w) / math.sqrt(r)

    split = w0 + min(1.0, 25.0 / zt)
    near = integrate_sqrt_endpoint(integrand, w0, split, spec)
    tail = integrate_semi_infinite(integrand, split, 1.0 / (2.0 * zt), spec)
    total = near + tail

    scale = math.exp(-e0 * zt)
    logger.debug(
        f"threshold integral u={u:.6g} omega~={ot:.6g} z~={zt:.6g}: w0={w0:.10g}, "
        f"I={total.value:.6e} x exp(-{e0 * zt:.4g}), neval={total.evaluations}"
    )
    return total.scaled(scale), report


def casimir_polder(a: AtomParams, z: float) -> float:
    """Static Casimir-Polder force of a perfect conductor, -3 hbar c alpha / (2 pi z^5) [N]."""
    if not z > 0:
        raise DomainError(f"z must be positive, got {z}")
    return -3.0 * HBAR * C_LIGHT * a.alpha / (2.0 * math.pi * z**5)


def _below_threshold(report: ThresholdReport, point: DimensionlessPoint, path: str) -> ForceResult:
    return ForceResult(
        normalized_value=0.0,
        raw_value=0.0,
        quadrature=ZERO_RESULT,
        threshold=report,
        point=point,
        path=path,
        notes=["u <= 1: single-photon resonance closed, force vanishes exactly"],
    )


def force2_normalized(
    m: MaterialParams,
    a: AtomParams,
    kin: Kinematics,
    spec: QuadratureSpec = DEFAULT_SPEC,
) -> ForceResult:
    """Second-order friction normalized by |F_CP|.

    f = (pi/6) (z~^5 / (u omega~)) (beta/c) times the threshold integral with
    numerator (2w^2 - 1)^2 (1 + omega~ w) / w^4. Returns exactly 0 for u <= 1.
    """
    m.require_dispersive()
    point = to_dimensionless(m, a, kin)
    if point.u <= 1.0:
        return _below_threshold(ThresholdReport(supersonic=False), point, "w")

    ot = point.omega_tilde

    def numerator(w: float) -> float:
        return (2.0 * w * w - 1.0) ** 2 * (1.0 + ot * w) / w**4

    integral, report = threshold_integral(point, numerator, spec)
    prefactor = (math.pi / 6.0) * point.z_tilde**5 / (point.u * ot) * (m.beta / C_LIGHT)
    f = prefactor * integral.value
    return ForceResult(
        normalized_value=f,
        raw_value=f * abs(casimir_polder(a, kin.z)),
        quadrature=integral.scaled(prefactor),
        threshold=report,
        point=point,
        path="w",
    )


def _force2_k_space(
    m: MaterialParams, a: AtomParams, kin: Kinematics, spec: QuadratureSpec
) -> ForceResult:
    """Direct evaluation of the Heaviside form in x = k z."""
    point = to_dimensionless(m, a, kin)
    report = threshold_w0(point.u, point.omega_tilde) if point.u > 1.0 else ThresholdReport(False)
    if not report.supersonic:
        return _below_threshold(report, point, "k")

    z, v, wp, wb = kin.z, kin.v, m.omega_p, a.omega_b
    x_c = float(k_of_w(report.w0, m)) * z

    def integrand(x: float) -> float:
        k = x / z
        om = float(omega_s(k, m))
        big_w = om / wp
        res = wb + om
        r = (k * v) ** 2 - res * res
        if r <= 0.0:
            if -r <= RADICAND_CLAMP * ((k * v) ** 2 + res * res):
                return 0.0
            raise DomainError(f"k-space radicand negative at k = {k:.6e}")
        return x * x * math.exp(-2.0 * (x - x_c)) / (big_w * (1.0 + 2.0 * big_w**2)) * res / math.sqrt(r)

    split = x_c + min(1.0, 25.0 / max(point.z_tilde, 1.0))
    total = integrate_sqrt_endpoint(integrand, x_c, split, spec) + integrate_semi_infinite(
        integrand, split, 0.5, spec
    )
    prefactor = 2.0 * a.d_squared * wp / (v * z**3) * math.exp(-2.0 * x_c) * HBAR
    norm = prefactor / abs(casimir_polder(a, z))
    return ForceResult(
        normalized_value=norm * total.value,
        raw_value=prefactor * total.value,
        quadrature=total.scaled(norm),
        threshold=report,
        point=point,
        path="k",
    )


def force2_raw(
    m: MaterialParams,
    a: AtomParams,
    kin: Kinematics,
    spec: QuadratureSpec = DEFAULT_SPEC,
    path: str = "w",
) -> ForceResult:
    """Second-order friction magnitude in newtons.

    Args:
        path: "w" (reduced frequency integral, default) or "k" (direct wavenumber
            integral of the Heaviside form, a consistency path)
    """
    m.require_dispersive()
    if path == "w":
        return force2_normalized(m, a, kin, spec)
    if path == "k":
        return _force2_k_space(m, a, kin, spec)
    raise DomainError(f"unknown integration path {path!r}")


def force2_nondispersive(m: MaterialParams, a: AtomParams, kin: Kinematics) -> float:
    """Normalized second-order friction in the beta -> 0 limit.

    With Omega_s = omega_p/sqrt(2) fixed and v k0 = omega_b + omega_p/sqrt(2):
    f = sqrt(2) pi z^5 omega_p omega_b k0^3 / (3 v c) [K_2(2 z k0) - K_1(2 z k0) / (2 z k0)].
    beta is ignored, so any MaterialParams is accepted.

    Raises:
        DomainError: v = 0, or 2 z k0 outside the range of bessel_k
    """
    if not kin.v > 0:
        raise DomainError("the non-dispersive force needs v > 0")
    k0 = (a.omega_b + m.omega_p / math.sqrt(2.0)) / kin.v
    x = 2.0 * kin.z * k0
    try:
        bracket = bessel_k(2, x) - bessel_k(1, x) / x
    except DomainError as e:
        raise DomainError(
            f"2 z k0 = {x:.4g} is outside the Bessel range; the force is below "
            f"double precision here (reduce z or increase v). {e}"
        ) from e
    return (
        math.sqrt(2.0) * math.pi * kin.z**5 * m.omega_p * a.omega_b * k0**3
        / (3.0 * kin.v * C_LIGHT)
        * bracket
    )


def force2_nondispersive_raw(m: MaterialParams, a: AtomParams, kin: Kinematics) -> float:
    """Non-dispersive second-order friction magnitude [N]."""
    return force2_nondispersive(m, a, kin) * abs(casimir_polder(a, kin.z))
