"""
Numerical kernels shared by the force and rate evaluators.

Adaptive quadrature is QUADPACK (scipy.integrate.quad, 21-point Gauss-Kronrod
panels with bisection). The wrappers here add the endpoint and tail handling the
friction integrals need and return a uniform QuadratureResult instead of raising,
so callers decide what non-convergence means.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
from scipy import integrate, optimize, special

from hydrofriction.errors import ConvergenceError, DomainError

logger = logging.getLogger(__name__)

ScalarFunction = Callable[[float], float]

# scipy.special.kv underflows to zero just above this argument
BESSEL_X_MAX = 700.0
BESSEL_X_MIN = 1e-300


@dataclass(frozen=True)
class QuadratureSpec:
    rel_tol: float = 1e-8
    abs_tol: float = 1e-14
    max_subdivisions: int = 2000

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise DomainError("quadrature tolerances must be positive")
        if self.max_subdivisions < 1:
            raise DomainError("max_subdivisions must be at least 1")

    def loosened(self, factor: float) -> QuadratureSpec:
        """Same spec with both tolerances multiplied by ``factor``."""
        return replace(self, rel_tol=self.rel_tol * factor, abs_tol=self.abs_tol * factor)


DEFAULT_SPEC = QuadratureSpec()
# Nested (3D) integrals run at a looser default.
NESTED_SPEC = QuadratureSpec(rel_tol=1e-6, abs_tol=1e-14, max_subdivisions=200)


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    error_estimate: float = 0.0
    evaluations: int = 0
    converged: bool = True

    def __add__(self, other: QuadratureResult) -> QuadratureResult:
        return QuadratureResult(
            value=self.value + other.value,
            error_estimate=self.error_estimate + other.error_estimate,
            evaluations=self.evaluations + other.evaluations,
            converged=self.converged and other.converged,
        )

    def scaled(self, factor: float) -> QuadratureResult:
        return replace(
            self, value=self.value * factor, error_estimate=self.error_estimate * abs(factor)
        )

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "error_estimate": self.error_estimate,
            "evaluations": self.evaluations,
            "converged": self.converged,
        }


ZERO_RESULT = QuadratureResult(value=0.0)


def require_converged(result: QuadratureResult, what: str) -> QuadratureResult:
    """Raise ConvergenceError carrying ``result`` unless it converged."""
    if not result.converged:
        raise ConvergenceError(
            f"{what}: quadrature did not converge (error estimate {result.error_estimate:.3e})",
            result,
        )
    return result


def integrate_adaptive(
    f: ScalarFunction,
    a: float,
    b: float,
    spec: QuadratureSpec = DEFAULT_SPEC,
    points: Sequence[float] | None = None,
) -> QuadratureResult:
    """Adaptive Gauss-Kronrod quadrature of f over [a, b].

    Args:
        f: Integrand, finite on [a, b]
        a: Lower limit
        b: Upper limit (b > a; b == a gives zero)
        spec: Tolerances and subdivision budget
        points: Interior break points (kinks, near-singular spots)

    Returns:
        QuadratureResult; converged is False when QUADPACK reports a problem,
        in which case value is its best estimate.
    """
    if b == a:
        return ZERO_RESULT
    if not b > a:
        raise DomainError(f"integration limits out of order: a={a}, b={b}")

    kwargs = {}
    if points:
        inner = sorted(p for p in points if a < p < b)
        if inner:
            kwargs["points"] = inner

    out = integrate.quad(
        f,
        a,
        b,
        epsabs=spec.abs_tol,
        epsrel=spec.rel_tol,
        limit=spec.max_subdivisions,
        full_output=1,
        **kwargs,
    )
    value, error = float(out[0]), float(out[1])
    info = out[2]
    converged = len(out) == 3 and math.isfinite(value)
    if not converged:
        message = out[3] if len(out) > 3 else "non-finite result"
        logger.warning(f"Quadrature on [{a:.6g}, {b:.6g}] did not converge: {message}")
    return QuadratureResult(
        value=value,
        error_estimate=error,
        evaluations=int(info.get("neval", 0)),
        converged=converged,
    )


def integrate_sqrt_endpoint(
    f: ScalarFunction, w0: float, b: float, spec: QuadratureSpec = DEFAULT_SPEC
) -> QuadratureResult:
    """Integrate f with an inverse-square-root singularity at w0.

    The substitution w = w0 +/- s^2 turns f(w) ~ g(w)/sqrt|w - w0| into the bounded
    integrand 2 s f(w0 +/- s^2). ``b`` is the regular endpoint and may lie on either
    side of w0; the result is the integral over the interval between them.
    """
    if b == w0:
        return ZERO_RESULT
    sign = 1.0 if b > w0 else -1.0
    s_max = math.sqrt(abs(b - w0))

    def g(s: float) -> float:
        if s == 0.0:
            return 0.0
        return 2.0 * s * f(w0 + sign * s * s)

    return integrate_adaptive(g, 0.0, s_max, spec)


def integrate_semi_infinite(
    f: ScalarFunction,
    a: float,
    decay_scale: float,
    spec: QuadratureSpec = DEFAULT_SPEC,
    margin: float = 5.0,
    max_doublings: int = 40,
) -> QuadratureResult:
    """Integrate an exponentially decaying f over [a, inf).

    The range is truncated at b = a + decay_scale (ln(1/abs_tol) + margin) and the
    truncation length doubled until the tail estimate |f(b)| decay_scale drops
    below tolerance.
    """
    if not decay_scale > 0:
        raise DomainError(f"decay_scale must be positive, got {decay_scale}")

    length = decay_scale * (math.log(1.0 / spec.abs_tol) + margin)
    tail = math.inf
    converged_tail = False
    for _ in range(max_doublings):
        b = a + length
        new_tail = abs(f(b)) * decay_scale
        if new_tail < spec.abs_tol:
            converged_tail = True
            break
        if new_tail > tail and tail < math.inf:
            logger.warning(f"Tail estimate not decreasing beyond {b:.6g}; integrand may not decay")
            break
        tail = new_tail
        length *= 2.0

    result = integrate_adaptive(f, a, a + length, spec)
    if not converged_tail:
        result = replace(result, converged=False)
    return result


def principal_value_1d(
    f: ScalarFunction,
    pole: float,
    a: float,
    b: float,
    spec: QuadratureSpec = DEFAULT_SPEC,
    eps_fraction: float = 1e-3,
) -> QuadratureResult:
    """Cauchy principal value of the integral of f over [a, b] with a simple pole.

    A symmetric window of half-width delta around the pole is integrated through the
    paired integrand f(pole + t) + f(pole - t), which is bounded at t = 0. The excised
    core [0, eps] is removed for three eps in ratio 1/4 and extrapolated to eps = 0
    with the error model c1 eps + c3 eps^3 (the paired integrand is even in t).
    """
    if not a < pole < b:
        return integrate_adaptive(f, a, b, spec)

    delta = min(pole - a, b - pole)
    result = ZERO_RESULT
    if pole - delta > a:
        result = result + integrate_adaptive(f, a, pole - delta, spec)
    if pole + delta < b:
        result = result + integrate_adaptive(f, pole + delta, b, spec)

    def paired(t: float) -> float:
        return f(pole + t) + f(pole - t)

    eps = delta * eps_fraction * np.array([1.0, 0.25, 0.0625])
    core = integrate_adaptive(paired, eps[0], delta, spec)
    partial = [core]
    for e in eps[1:]:
        partial.append(core + integrate_adaptive(paired, float(e), float(eps[0]), spec))

    values = np.array([p.value for p in partial])
    design = np.column_stack([np.ones(3), eps, eps**3])
    extrapolated = float(np.linalg.solve(design, values)[0])
    # Linear Richardson on the two smallest eps gauges the extrapolation error.
    linear = (eps[1] * values[2] - eps[2] * values[1]) / (eps[1] - eps[2])

    near = QuadratureResult(
        value=extrapolated,
        error_estimate=sum(p.error_estimate for p in partial[1:]) + abs(extrapolated - linear),
        evaluations=sum(p.evaluations for p in partial),
        converged=all(p.converged for p in partial),
    )
    return result + near


def bessel_k(n: int, x: float) -> float:
    """Modified Bessel function of the second kind K_n(x) for n in {0, 1, 2}.

    Raises:
        DomainError: n not supported, x <= 0, or x beyond the underflow limit
    """
    if n not in (0, 1, 2):
        raise DomainError(f"bessel_k supports n in {{0, 1, 2}}, got {n}")
    if not x > BESSEL_X_MIN:
        raise DomainError(f"bessel_k requires x > 0, got {x}")
    if x > BESSEL_X_MAX:
        raise DomainError(
            f"K_{n}({x:.6g}) underflows; use bessel_k_scaled and carry exp(-x) separately"
        )
    return float(special.kv(n, x))


def bessel_k_scaled(n: int, x: float) -> float:
    """exp(x) K_n(x), finite for all x > 0."""
    if n not in (0, 1, 2):
        raise DomainError(f"bessel_k supports n in {{0, 1, 2}}, got {n}")
    if not x > BESSEL_X_MIN:
        raise DomainError(f"bessel_k requires x > 0, got {x}")
    return float(special.kve(n, x))


def find_roots_bracketed(
    f: ScalarFunction, a: float, b: float, grid_n: int = 64, tol: float = 1e-12
) -> list[float]:
    """All roots of f on [a, b] that show up as sign changes on a grid_n-panel scan.

    Each bracket is refined by bisection to ``tol``. Roots where f touches zero
    without changing sign are missed unless they fall on a grid node.
    """
    if grid_n < 1:
        raise DomainError("grid_n must be at least 1")
    grid = np.linspace(a, b, grid_n + 1)
    values = np.array([f(float(x)) for x in grid])

    roots = [float(x) for x, fx in zip(grid, values) if fx == 0.0]
    for lo, hi, flo, fhi in zip(grid[:-1], grid[1:], values[:-1], values[1:]):
        if flo * fhi < 0.0:
            roots.append(float(optimize.bisect(f, lo, hi, xtol=tol, maxiter=400)))
    return sorted(roots)


def central_diff(f: ScalarFunction, x: float, h: float | None = None) -> float:
    """Symmetric finite difference (f(x + h) - f(x - h)) / 2h."""
    if h is None:
        h = max(1e-6 * abs(x), 1e-9)
    return (f(x + h) - f(x - h)) / (2.0 * h)


@lru_cache(maxsize=32)
def _leggauss(n: int) -> tuple[np.ndarray, np.ndarray]:
    return np.polynomial.legendre.leggauss(n)


def gauss_legendre(n: int, a: float, b: float) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of the n-point Gauss-Legendre rule on [a, b]."""
    x, wts = _leggauss(n)
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * wts
