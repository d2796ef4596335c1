"""
Brute-force reference evaluators.

Each oracle starts from the unreduced (k, theta) form of an observable and only
shares the dispersion relation with the production code. Energy delta functions
are replaced by Lorentzians (lambda/pi) / (x^2 + lambda^2) and the smoothing is
extrapolated to lambda -> 0. These are slow by construction.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import integrate

from hydrofriction.dispersion import (
    HBAR,
    AtomParams,
    Kinematics,
    MaterialParams,
    omega_s,
    reduced_negative_onset,
    reduced_omega_s,
)
from hydrofriction.errors import DomainError
from hydrofriction.friction4 import DEFAULT_RESONANCE_WIDTH
from hydrofriction.numerics import find_roots_bracketed

logger = logging.getLogger(__name__)

# exp(-2 k z) below 1e-35 is dropped
X_MAX = 40.0
MC_CHUNK = 250_000
INCONCLUSIVE_REL_STD = 0.2


@dataclass(frozen=True)
class SmoothingSchedule:
    """Lorentzian widths in units of omega_p, strictly decreasing."""

    lambdas: tuple[float, ...] = (1e-2, 5e-3, 2.5e-3)
    extrapolation: int | None = None  # polynomial order in lambda; default len(lambdas) - 1

    def __post_init__(self):
        lam = np.asarray(self.lambdas, dtype=float)
        if lam.size < 1 or np.any(lam <= 0) or np.any(np.diff(lam) >= 0):
            raise DomainError(f"smoothing widths must be positive and strictly decreasing: {self.lambdas}")
        order = self.order
        if not 0 <= order < lam.size:
            raise DomainError(f"extrapolation order {order} needs more than {lam.size} widths")

    @property
    def order(self) -> int:
        return len(self.lambdas) - 1 if self.extrapolation is None else self.extrapolation

    def halved(self) -> SmoothingSchedule:
        return SmoothingSchedule(tuple(x / 2.0 for x in self.lambdas), self.extrapolation)


DEFAULT_SCHEDULE = SmoothingSchedule()


class MonteCarloEstimate(NamedTuple):
    value: float
    std_error: float

    @property
    def inconclusive(self) -> bool:
        if self.value == 0.0:
            return self.std_error > 0.0
        return self.std_error / abs(self.value) > INCONCLUSIVE_REL_STD


def _lorentzian(x, lam):
    return (lam / math.pi) / (x * x + lam * lam)


def extrapolate(lambdas, values, order: int) -> float:
    """Polynomial extrapolation of values(lambda) to lambda = 0.

    Falls back to the widest-lambda value with a warning when the sequence is not
    monotone, since the extrapolation is then unreliable.
    """
    lambdas = np.asarray(lambdas, dtype=float)
    values = np.asarray(values, dtype=float)
    steps = np.diff(values)
    if values.size > 1 and not (np.all(steps >= 0) or np.all(steps <= 0)):
        logger.warning(f"lambda extrapolation skipped: non-monotone sequence {values.tolist()}")
        return float(values[0])
    if order == 0:
        return float(values[-1])
    coeffs = np.polyfit(lambdas, values, order)
    return float(coeffs[-1])


def _resonance_onset_x(m: MaterialParams, a: AtomParams, kin: Kinematics) -> float | None:
    """x = k z where k v first reaches omega_b + Omega_s(k), found by bracketing."""
    if kin.v <= m.beta:
        return None

    def gap(x: float) -> float:
        k = x / kin.z
        return k * kin.v - a.omega_b - float(omega_s(k, m))

    roots = find_roots_bracketed(gap, 0.0, X_MAX * 50.0, grid_n=4000, tol=1e-14)
    return roots[0] if roots else None


def _smoothed_angular(x, lam, m, a, kin, weight_cos: bool) -> float:
    k = x / kin.z
    big_a = (a.omega_b + float(omega_s(k, m))) / m.omega_p
    big_b = k * kin.v / m.omega_p

    def f(theta: float) -> float:
        val = _lorentzian(big_a - big_b * math.cos(theta), lam)
        return val * math.cos(theta) if weight_cos else val

    points = None
    if 0.0 < big_b and big_a < big_b:
        points = [math.acos(big_a / big_b)]
    out = integrate.quad(f, 0.0, math.pi, epsabs=0.0, epsrel=1e-10, limit=400, points=points)
    return 2.0 * out[0]


def _smoothed_k_integral(m, a, kin, lam, grid_n, power, weight_cos) -> float:
    x_c = _resonance_onset_x(m, a, kin)
    points = []
    if x_c is not None:
        dx = lam * m.omega_p * kin.z / kin.v
        points = [p for p in (x_c - 5.0 * dx, x_c, x_c + 5.0 * dx) if 0.0 < p < X_MAX]

    def g(x: float) -> float:
        if x == 0.0:
            return 0.0
        big_w = float(reduced_omega_s(x * m.beta / (kin.z * m.omega_p)))
        return (
            x**power * math.exp(-2.0 * x) / (big_w * (1.0 + 2.0 * big_w * big_w))
            * _smoothed_angular(x, lam, m, a, kin, weight_cos)
        )

    out = integrate.quad(g, 0.0, X_MAX, epsabs=0.0, epsrel=1e-9, limit=grid_n, points=points or None)
    return out[0]


def oracle_force2(
    m: MaterialParams,
    a: AtomParams,
    kin: Kinematics,
    schedule: SmoothingSchedule = DEFAULT_SCHEDULE,
    grid_n: int = 2000,
) -> float:
    """Second-order friction magnitude [N] from the smoothed (k, theta) integral.

    F = hbar d^2 / z^4 int dx x^3 exp(-2x) / (W (1 + 2 W^2)) int dtheta cos(theta) L(E),
    x = k z, W = Omega_s / omega_p, E = (omega_b + Omega_s - k v cos(theta)) / omega_p.
    ``grid_n`` bounds the subdivisions of the k integral.
    """
    m.require_dispersive()
    values = [
        _smoothed_k_integral(m, a, kin, lam, grid_n, power=3, weight_cos=True)
        for lam in schedule.lambdas
    ]
    result = extrapolate(schedule.lambdas, values, schedule.order)
    logger.debug(f"oracle_force2: smoothed {values} -> {result:.6e}")
    return HBAR * a.d_squared / kin.z**4 * result


def oracle_gamma_g(
    m: MaterialParams,
    a: AtomParams,
    kin: Kinematics,
    schedule: SmoothingSchedule = DEFAULT_SCHEDULE,
    grid_n: int = 2000,
) -> float:
    """Decay rate [1/s]: gamma = d^2 / z^3 int dx x^2 exp(-2x) / (W (1 + 2 W^2)) int dtheta L(E)."""
    m.require_dispersive()
    values = [
        _smoothed_k_integral(m, a, kin, lam, grid_n, power=2, weight_cos=False)
        for lam in schedule.lambdas
    ]
    return a.d_squared / kin.z**3 * extrapolate(schedule.lambdas, values, schedule.order)


def _two_photon_weight(k1, t1, k2, t2, u, omega_tilde, z_tilde, width, lam):
    w1, w2 = reduced_omega_s(k1), reduced_omega_s(k2)
    p1 = w1 - u * k1 * np.cos(t1)
    p2 = w2 - u * k2 * np.cos(t2)
    inv_b = 1.0 / omega_tilde
    bracket = np.abs(1.0 / (inv_b + p1 - 1j * width) + 1.0 / (inv_b + p2 - 1j * width)) ** 2
    return (
        (k1 * k2) ** 2 * (1.0 - np.cos(t1 - t2)) ** 2 * (k1 * np.cos(t1) + k2 * np.cos(t2))
        * np.exp(-2.0 * z_tilde * (k1 + k2))
        * bracket / (w1 * (1.0 + 2.0 * w1**2) * w2 * (1.0 + 2.0 * w2**2))
        * _lorentzian(p1 + p2, lam)
    )


def oracle_force4_mc(
    m: MaterialParams,
    a: AtomParams,
    kin: Kinematics,
    lam: float = 1e-2,
    samples: int = 4_000_000,
    seed: int = 12345,
    width: float = DEFAULT_RESONANCE_WIDTH,
) -> MonteCarloEstimate:
    """Monte Carlo estimate of the two-photon force [N] with a Lorentzian energy delta.

    Reduced wavenumbers are drawn from an exponential of mean 1/(2 z~) + kappa_th
    (kappa_th the onset of negative co-moving frequencies) and angles uniformly.
    Chunks draw from SeedSequence children in index order, so a given seed is
    reproducible regardless of how chunks are scheduled.
    """
    m.require_dispersive()
    u = kin.v / m.beta
    if u <= 1.0:
        return MonteCarloEstimate(0.0, 0.0)
    omega_tilde = m.omega_p / a.omega_b
    z_tilde = kin.z * m.omega_p / m.beta
    mean = 1.0 / (2.0 * z_tilde) + reduced_negative_onset(u)
    shift = 2.0 * z_tilde * reduced_negative_onset(u)

    n_chunks = max(1, math.ceil(samples / MC_CHUNK))
    children = np.random.SeedSequence(seed).spawn(n_chunks)
    total = 0.0
    total_sq = 0.0
    drawn = 0
    for i, child in enumerate(children):
        n = min(MC_CHUNK, samples - i * MC_CHUNK)
        rng = np.random.default_rng(child)
        k1 = rng.exponential(mean, n)
        k2 = rng.exponential(mean, n)
        t1 = rng.uniform(-math.pi, math.pi, n)
        t2 = rng.uniform(-math.pi, math.pi, n)
        density = np.exp(-(k1 + k2) / mean) / (mean * mean * (2.0 * math.pi) ** 2)
        f = _two_photon_weight(k1, t1, k2, t2, u, omega_tilde, z_tilde, width, lam)
        ratio = f * math.exp(shift) / density
        total += float(np.sum(ratio))
        total_sq += float(np.sum(ratio * ratio))
        drawn += n

    mean_est = total / drawn
    var = max(total_sq / drawn - mean_est**2, 0.0)
    std = math.sqrt(var / drawn)
    prefactor = -HBAR * a.d_squared**2 * m.omega_p**6 / (16.0 * math.pi * m.beta**7) * math.exp(-shift)
    estimate = MonteCarloEstimate(prefactor * mean_est, abs(prefactor) * std)
    if estimate.inconclusive:
        logger.warning(
            f"Monte Carlo two-photon estimate inconclusive: {estimate.value:.3e} +/- {estimate.std_error:.3e}"
        )
    return estimate


def oracle_bessel_k(n: int, x: float) -> float:
    """K_n(x) = int_0^inf exp(-x cosh t) cosh(n t) dt by direct quadrature."""
    if n not in (0, 1, 2):
        raise DomainError(f"oracle_bessel_k supports n in {{0, 1, 2}}, got {n}")
    if not x > 0:
        raise DomainError(f"x must be positive, got {x}")
    if x > 700.0:
        raise DomainError(f"K_{n}({x}) underflows")

    # exp(-x (cosh t - 1)) < exp(-750) beyond t_max
    t_max = math.acosh(1.0 + 750.0 / x)

    def f(t: float) -> float:
        return math.exp(-x * (math.cosh(t) - 1.0)) * math.cosh(n * t)

    out = integrate.quad(f, 0.0, t_max, epsabs=0.0, epsrel=1e-13, limit=500)
    return out[0] * math.exp(-x)
