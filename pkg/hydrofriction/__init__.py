"""
hydrofriction - quantum friction on an atom moving above a hydrodynamic metal.

Second- and fourth-order frictional forces, the velocity-dependent decay rate
and level shift of the atomic ground state, the supersonic threshold v > beta,
and independent brute-force oracles for the reduced formulas.
"""

__version__ = "0.1.0"

from hydrofriction.dispersion import (  # noqa: E402
    AtomParams,
    DimensionlessPoint,
    Kinematics,
    MaterialParams,
    ModePoint,
)
from hydrofriction.errors import (  # noqa: E402
    ConfigError,
    ConvergenceError,
    DomainError,
    HydroFrictionError,
    ValidityError,
)

__all__ = [
    "__version__",
    "AtomParams",
    "ConfigError",
    "ConvergenceError",
    "DimensionlessPoint",
    "DomainError",
    "HydroFrictionError",
    "Kinematics",
    "MaterialParams",
    "ModePoint",
    "ValidityError",
]
