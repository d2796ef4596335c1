"""Exception hierarchy shared by the library and the command line front-end."""

from __future__ import annotations

from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from hydrofriction.numerics import QuadratureResult


class HydroFrictionError(Exception):
    """Base class for every error raised by hydrofriction."""


class DomainError(HydroFrictionError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ConvergenceError(HydroFrictionError):
    """A quadrature did not reach its requested tolerance."""

    def __init__(self, message: str, result: QuadratureResult | None = None):
        super().__init__(message)
        self.result = result


class ValidityError(HydroFrictionError):
    """The perturbative expansion is used outside its range of validity."""


class ConfigError(HydroFrictionError, ValueError):
    """Invalid run configuration. The message names the offending field."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field
