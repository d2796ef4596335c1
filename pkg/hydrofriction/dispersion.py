"""
Surface-mode kinematics of a hydrodynamic metal.

Every observable in hydrofriction is built from the few closed forms collected here:

- the surface-plasmon dispersion relation Omega_s(k) and its inverse k(w)
- the evanescent decay constant p_s(k) inside the metal
- the squared mode amplitude phi_k^2 of the quantized surface field
- the Doppler-shifted frequency seen by the moving atom
- the reduced variables u, omega_tilde, z_tilde and w

Internally hbar = 1, so energies are angular frequencies [rad/s]. Inputs are SI.
All functions accept scalars or numpy arrays.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import constants

from hydrofriction.errors import DomainError

logger = logging.getLogger(__name__)

C_LIGHT = constants.c  # 2.99792458e8 m/s, exact
HBAR = constants.hbar
BOHR_RADIUS = constants.physical_constants["Bohr radius"][0]

BAND_BOTTOM = 1.0 / math.sqrt(2.0)  # Omega_s(0) / omega_p

# Soft bound on the atom speed; the model is non-retarded.
NONRELATIVISTIC_LIMIT = 0.1 * C_LIGHT


@dataclass(frozen=True)
class MaterialParams:
    """Hydrodynamic metal.

    Attributes:
        omega_p: Plasma frequency [rad/s]
        beta: Sound (compressional wave) speed of the electron fluid [m/s].
            beta = 0 is the non-dispersive limit and is only accepted by
            ``friction2.force2_nondispersive``.
    """

    omega_p: float
    beta: float

    def __post_init__(self):
        if not self.omega_p > 0:
            raise DomainError(f"omega_p must be positive, got {self.omega_p}")
        if not self.beta >= 0:
            raise DomainError(f"beta must be non-negative, got {self.beta}")

    @property
    def is_dispersive(self) -> bool:
        return self.beta > 0

    def require_dispersive(self) -> None:
        """Raise DomainError for beta = 0, where u = v/beta is undefined."""
        if not self.is_dispersive:
            raise DomainError(
                "beta = 0 has no surface-mode dispersion; use the non-dispersive path"
            )


@dataclass(frozen=True)
class AtomParams:
    """Two-level atom with a threefold degenerate excited state.

    Attributes:
        omega_b: Transition frequency [rad/s]
        alpha: Static polarizability volume [m^3, Gaussian convention]
    """

    omega_b: float
    alpha: float = 4.5 * BOHR_RADIUS**3

    def __post_init__(self):
        if not self.omega_b > 0:
            raise DomainError(f"omega_b must be positive, got {self.omega_b}")
        if not self.alpha > 0:
            raise DomainError(f"alpha must be positive, got {self.alpha}")

    @property
    def d_squared(self) -> float:
        """Squared dipole coupling, from alpha = 2 d^2 / omega_b [m^3/s]."""
        return 0.5 * self.alpha * self.omega_b

    @classmethod
    def from_dipole(cls, omega_b: float, d_squared: float) -> AtomParams:
        return cls(omega_b=omega_b, alpha=2.0 * d_squared / omega_b)


@dataclass(frozen=True)
class Kinematics:
    """Uniform motion parallel to the surface.

    Attributes:
        v: Atom speed [m/s]
        z: Gap distance to the surface [m]
    """

    v: float
    z: float

    def __post_init__(self):
        if not self.v >= 0:
            raise DomainError(f"v must be non-negative, got {self.v}")
        if not self.z > 0:
            raise DomainError(f"z must be positive, got {self.z}")
        if self.v >= NONRELATIVISTIC_LIMIT:
            logger.warning(
                f"v = {self.v:.3e} m/s is not small compared to c; "
                "retardation is neglected by this model"
            )

    def with_speed(self, v: float) -> Kinematics:
        return Kinematics(v=v, z=self.z)


@dataclass(frozen=True)
class DimensionlessPoint:
    """Reduced variables u = v/beta, omega_tilde = omega_p/omega_b, z_tilde = z omega_p/beta.

    ``w`` is an optional surface-mode frequency in units of omega_p.
    """

    u: float
    omega_tilde: float
    z_tilde: float
    w: float | None = None

    def __post_init__(self):
        if not (self.u >= 0 and self.omega_tilde > 0 and self.z_tilde > 0):
            raise DomainError(f"invalid dimensionless point {self}")
        if self.w is not None and self.w < BAND_BOTTOM:
            raise DomainError(f"w = {self.w} lies below the surface band bottom 1/sqrt(2)")


@dataclass(frozen=True)
class ModePoint:
    """In-plane wave vector (k cos theta, k sin theta)."""

    k: float
    theta: float

    def __post_init__(self):
        if not self.k >= 0:
            raise DomainError(f"k must be non-negative, got {self.k}")
        if not 0.0 <= self.theta < 2.0 * math.pi:
            raise DomainError(f"theta must lie in [0, 2pi), got {self.theta}")


# ---------------------------------------------------------------------------
# Reduced (dimensionless) forms: kappa = k beta / omega_p, w = Omega_s / omega_p
# ---------------------------------------------------------------------------


def reduced_omega_s(kappa):
    """Omega_s / omega_p as a function of kappa = k beta / omega_p."""
    kappa = np.asarray(kappa, dtype=float)
    return 0.5 * (np.sqrt(2.0 + kappa * kappa) + kappa)


def reduced_omega_s_slope(kappa):
    """d(Omega_s/omega_p)/d(kappa); lies in [1/2, 1)."""
    kappa = np.asarray(kappa, dtype=float)
    return 0.5 * (kappa / np.sqrt(2.0 + kappa * kappa) + 1.0)


def reduced_k(w):
    """kappa as a function of w; exact inverse of reduced_omega_s."""
    w = np.asarray(w, dtype=float)
    return (2.0 * w * w - 1.0) / (2.0 * w)


def reduced_negative_onset(u: float) -> float:
    """Smallest kappa with a non-positive co-moving frequency Omega_s - k v at theta = 0.

    Only exists for u > 1: kappa = 1 / sqrt(2 u (u - 1)).
    """
    if not u > 1.0:
        raise DomainError(f"modes of negative co-moving frequency need u > 1, got u={u}")
    return 1.0 / math.sqrt(2.0 * u * (u - 1.0))


# ---------------------------------------------------------------------------
# SI forms
# ---------------------------------------------------------------------------


def omega_s(k, m: MaterialParams):
    """Surface-mode frequency Omega_s(k) = (sqrt(2 omega_p^2 + beta^2 k^2) + beta k) / 2.

    Args:
        k: In-plane wavenumber [1/m], k >= 0
        m: Material; beta must be positive

    Returns:
        Angular frequency [rad/s], >= omega_p / sqrt(2)
    """
    m.require_dispersive()
    k = np.asarray(k, dtype=float)
    if np.any(k < 0):
        raise DomainError("k must be non-negative")
    bk = m.beta * k
    return 0.5 * (np.sqrt(2.0 * m.omega_p**2 + bk * bk) + bk)


def p_s(k, m: MaterialParams):
    """Decay constant of the surface mode inside the metal [1/m]."""
    m.require_dispersive()
    k = np.asarray(k, dtype=float)
    if np.any(k < 0):
        raise DomainError("k must be non-negative")
    return 0.5 * (-k + np.sqrt(k * k + 2.0 * (m.omega_p / m.beta) ** 2))


def k_of_w(w, m: MaterialParams):
    """Wavenumber of the surface mode with Omega_s = w omega_p.

    Raises:
        DomainError: w below the band bottom 1/sqrt(2)
    """
    m.require_dispersive()
    w = np.asarray(w, dtype=float)
    # Allow the band bottom itself to be hit through round-off.
    if np.any(w < BAND_BOTTOM * (1.0 - 1e-15)):
        raise DomainError("w lies below the surface band bottom 1/sqrt(2)")
    return np.maximum(m.omega_p / m.beta * reduced_k(w), 0.0)


def dk_dw(w, m: MaterialParams):
    """Jacobian of k_of_w: omega_p (2 w^2 + 1) / (2 beta w^2)."""
    m.require_dispersive()
    w = np.asarray(w, dtype=float)
    return m.omega_p * (2.0 * w * w + 1.0) / (2.0 * m.beta * w * w)


def phi_k_sq(k, m: MaterialParams):
    """Squared amplitude of the quantized surface field [m/s].

    phi_k^2 = omega_p^4 / (4 pi k Omega_s (omega_p^2 + 2 Omega_s^2)). Diverges as 1/k.
    """
    k = np.asarray(k, dtype=float)
    if np.any(k <= 0):
        raise DomainError("phi_k^2 is undefined at k = 0")
    om = omega_s(k, m)
    return m.omega_p**4 / (4.0 * math.pi * k * om * (m.omega_p**2 + 2.0 * om * om))


def phi_k_sq_small_k_limit(m: MaterialParams) -> float:
    """lim k->0 of k phi_k^2 = omega_p sqrt(2) / (8 pi)."""
    return m.omega_p * math.sqrt(2.0) / (8.0 * math.pi)


def doppler(k, theta, v: float, m: MaterialParams):
    """Doppler-shifted frequency Omega_s(k) - k v cos(theta) seen in the atom frame."""
    k = np.asarray(k, dtype=float)
    return omega_s(k, m) - k * v * np.cos(theta)


def to_dimensionless(
    m: MaterialParams, a: AtomParams, kin: Kinematics, w: float | None = None
) -> DimensionlessPoint:
    """Reduce SI parameters to (u, omega_tilde, z_tilde[, w])."""
    m.require_dispersive()
    return DimensionlessPoint(
        u=kin.v / m.beta,
        omega_tilde=m.omega_p / a.omega_b,
        z_tilde=kin.z * m.omega_p / m.beta,
        w=w,
    )


def from_dimensionless(
    point: DimensionlessPoint, omega_p: float, beta: float, alpha: float | None = None
) -> tuple[MaterialParams, AtomParams, Kinematics]:
    """Inverse of to_dimensionless for a chosen omega_p and beta."""
    m = MaterialParams(omega_p=omega_p, beta=beta)
    atom_kwargs = {"omega_b": omega_p / point.omega_tilde}
    if alpha is not None:
        atom_kwargs["alpha"] = alpha
    a = AtomParams(**atom_kwargs)
    kin = Kinematics(v=point.u * beta, z=point.z_tilde * beta / omega_p)
    return m, a, kin
