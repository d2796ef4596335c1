"""
Run configuration.

A run is described by a RunConfig assembled from three sources, later ones
winning: built-in defaults, an optional config file, command-line flags.

Config files are flat ``key = value unit`` text:

    # reference metal
    omega_p = 1e16 rad/s
    beta    = 1000 km/s
    z       = 10 nm
    u_range = 1:20:200
    omega_tilde = 1, 5

Physical keys must carry a unit. Unknown keys and units are rejected.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from hydrofriction.dispersion import (
    AtomParams,
    DimensionlessPoint,
    Kinematics,
    MaterialParams,
    from_dimensionless,
)
from hydrofriction.errors import ConfigError, DomainError

logger = logging.getLogger(__name__)

THREADS_ENV = "HYDROFRICTION_THREADS"
FORMATS = ("json", "csv")

# key -> {unit: factor to SI}
UNITS: dict[str, dict[str, float]] = {
    "omega_p": {"rad/s": 1.0},
    "omega_b": {"rad/s": 1.0},
    "beta": {"m/s": 1.0, "km/s": 1e3},
    "v": {"m/s": 1.0, "km/s": 1e3},
    "alpha": {"m^3": 1.0, "nm^3": 1e-27, "angstrom^3": 1e-30},
    "z": {"m": 1.0, "nm": 1e-9},
    "t": {"s": 1.0},
}
LIST_KEYS = ("u", "omega_tilde", "z_tilde")
FLOAT_KEYS = ("rel_tol",)
INT_KEYS = ("seed", "threads")
TEXT_KEYS = ("format", "out", "u_range")

# Typical material ranges; outside them the model still runs, with a warning
SOFT_BOUNDS: dict[str, tuple[float, float]] = {
    "omega_p": (1e15, 1e16),
    "beta": (1e6, 1e7),
    "z": (10e-9, 100e-9),
    "omega_b": (1e15, 1e16),
    "u": (1.0, 20.0),
    "omega_tilde": (0.5, 10.0),
    "z_tilde": (10.0, 1000.0),
}


@dataclass
class RunConfig:
    """Everything a command needs. Physical values are SI."""

    omega_p: float = 1e16
    beta: float = 1e6
    omega_b: float = 1e16
    alpha: float | None = None
    z: float | None = None
    v: float | None = None
    u: list[float] | None = None
    u_range: tuple[float, float, int] | None = None
    omega_tilde: list[float] | None = None
    z_tilde: list[float] | None = None
    t: float = 0.0
    rel_tol: float = 1e-8
    seed: int = 12345
    format: str = "json"
    out: Path | None = None
    threads: int | None = None
    options: dict = field(default_factory=dict)

    # -- parameter builders -------------------------------------------------

    def material(self) -> MaterialParams:
        try:
            return MaterialParams(omega_p=self.omega_p, beta=self.beta)
        except DomainError as e:
            raise ConfigError("beta" if "beta" in str(e) else "omega_p", str(e)) from e

    def atom(self) -> AtomParams:
        try:
            if self.alpha is None:
                return AtomParams(omega_b=self.omega_b)
            return AtomParams(omega_b=self.omega_b, alpha=self.alpha)
        except DomainError as e:
            raise ConfigError("omega_b" if "omega_b" in str(e) else "alpha", str(e)) from e

    def kinematics(self) -> Kinematics:
        """Kinematics of a single-point command from z and v (or a single u)."""
        if self.z is None:
            raise ConfigError("z", "gap distance is required")
        v = self.v
        if v is None:
            speeds = self.u_values()
            if len(speeds) != 1:
                raise ConfigError("v", "give --v or exactly one --u for a single-point command")
            v = speeds[0] * self.beta
        try:
            return Kinematics(v=v, z=self.z)
        except DomainError as e:
            raise ConfigError("v" if "v " in str(e) else "z", str(e)) from e

    def u_values(self) -> list[float]:
        """Velocities u = v/beta from u_range, an explicit u list, or v."""
        if self.u_range is not None:
            lo, hi, n = self.u_range
            return [float(x) for x in np.linspace(lo, hi, n)]
        if self.u:
            return list(self.u)
        if self.v is not None and self.beta > 0:
            return [self.v / self.beta]
        return []

    def sweep_points(self) -> list[DimensionlessPoint]:
        """Cartesian product u x omega_tilde x z_tilde, u varying fastest.

        Missing omega_tilde or z_tilde fall back to the values implied by omega_b and z.
        """
        us = self.u_values()
        if not us:
            raise ConfigError("u", "a sweep needs --u, --u-range or --v")
        ots = self.omega_tilde or [self.omega_p / self.omega_b]
        if self.z_tilde:
            zts = self.z_tilde
        elif self.z is not None:
            zts = [self.z * self.omega_p / self.beta]
        else:
            raise ConfigError("z_tilde", "a sweep needs --z-tilde or --z")
        points = []
        for ot in ots:
            for zt in zts:
                for u in us:
                    try:
                        points.append(DimensionlessPoint(u=u, omega_tilde=ot, z_tilde=zt))
                    except DomainError as e:
                        raise ConfigError("u", str(e)) from e
        return points

    def physical(self, point: DimensionlessPoint) -> tuple[MaterialParams, AtomParams, Kinematics]:
        """SI parameters of a sweep point at this config's omega_p and beta."""
        if not self.beta > 0:
            raise ConfigError("beta", "sweeps need a positive sound speed")
        return from_dimensionless(point, self.omega_p, self.beta, self.alpha)

    def check_soft_bounds(self) -> list[str]:
        """Warn about values outside the tabulated parameter ranges; returns the messages."""
        values: dict[str, list[float]] = {
            "omega_p": [self.omega_p],
            "beta": [self.beta],
            "omega_b": [self.omega_b],
        }
        if self.z is not None:
            values["z"] = [self.z]
        if self.omega_tilde:
            values["omega_tilde"] = list(self.omega_tilde)
        if self.z_tilde:
            values["z_tilde"] = list(self.z_tilde)
        us = self.u_values()
        if us:
            values["u"] = us
        messages = []
        for key, vals in values.items():
            lo, hi = SOFT_BOUNDS[key]
            outside = [x for x in vals if not lo <= x <= hi]
            if outside:
                msg = f"{key} = {outside[0]:.4g} outside the usual range [{lo:.4g}, {hi:.4g}]"
                logger.warning(msg)
                messages.append(msg)
        return messages

    def worker_count(self, n_items: int) -> int:
        """min(threads or HYDROFRICTION_THREADS or cpu_count, n_items), at least 1."""
        limit = self.threads
        if limit is None:
            env = os.environ.get(THREADS_ENV)
            if env:
                try:
                    limit = int(env)
                except ValueError as e:
                    raise ConfigError(THREADS_ENV, f"not an integer: {env!r}") from e
        if limit is None:
            limit = os.cpu_count() or 1
        if limit < 1:
            raise ConfigError("threads", f"must be at least 1, got {limit}")
        return max(1, min(limit, n_items))

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            out[f.name] = str(value) if isinstance(value, Path) else value
        return out


def parse_u_range(text: str) -> tuple[float, float, int]:
    """Parse ``lo:hi:n``."""
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigError("u_range", f"expected lo:hi:n, got {text!r}")
    try:
        lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError as e:
        raise ConfigError("u_range", f"expected lo:hi:n, got {text!r}") from e
    if n < 1 or lo < 0 or hi < lo:
        raise ConfigError("u_range", f"need 0 <= lo <= hi and n >= 1, got {text!r}")
    return lo, hi, n


def _parse_float(key: str, text: str) -> float:
    try:
        return float(text)
    except ValueError as e:
        raise ConfigError(key, f"not a number: {text!r}") from e


def parse_line(key: str, raw: str):
    """Convert one ``value [unit]`` string for ``key`` to its RunConfig value."""
    if key in UNITS:
        parts = raw.split()
        if len(parts) != 2:
            raise ConfigError(key, f"expected '<number> <unit>', got {raw!r}")
        number, unit = parts
        factors = UNITS[key]
        if unit not in factors:
            raise ConfigError(key, f"unknown unit {unit!r}; accepted: {', '.join(factors)}")
        return _parse_float(key, number) * factors[unit]
    if key in LIST_KEYS:
        return [_parse_float(key, item.strip()) for item in raw.split(",") if item.strip()]
    if key in FLOAT_KEYS:
        return _parse_float(key, raw)
    if key in INT_KEYS:
        try:
            return int(raw)
        except ValueError as e:
            raise ConfigError(key, f"not an integer: {raw!r}") from e
    if key == "u_range":
        return parse_u_range(raw)
    if key == "format":
        if raw not in FORMATS:
            raise ConfigError(key, f"must be one of {FORMATS}, got {raw!r}")
        return raw
    if key == "out":
        return Path(raw)
    raise ConfigError(key, "unknown configuration key")


def parse_config_text(text: str) -> dict:
    """Parse config file contents into a dict of RunConfig overrides."""
    values: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", f"expected 'key = value', got {line!r}")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key in values:
            logger.warning(f"config key {key} given twice; line {lineno} wins")
        values[key] = parse_line(key, raw)
    return values


def load_config_file(path: str | Path) -> dict:
    """Read and parse a config file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError("config", f"cannot read {path}: {e}") from e
    values = parse_config_text(text)
    logger.info(f"Loaded {len(values)} setting(s) from {path}")
    return values


def build_config(file_values: dict | None = None, flag_values: dict | None = None) -> RunConfig:
    """Merge defaults < file < flags. None-valued flags are treated as unset."""
    config = RunConfig()
    known = {f.name for f in fields(RunConfig)}
    for source in (file_values or {}, flag_values or {}):
        updates = {}
        for key, value in source.items():
            if value is None:
                continue
            if key not in known:
                raise ConfigError(key, "unknown configuration key")
            updates[key] = value
        config = replace(config, **updates)
    if config.format not in FORMATS:
        raise ConfigError("format", f"must be one of {FORMATS}, got {config.format!r}")
    if not config.rel_tol > 0:
        raise ConfigError("rel_tol", f"must be positive, got {config.rel_tol}")
    if not config.t >= 0:
        raise ConfigError("t", f"must be non-negative, got {config.t}")
    return config
