"""
Command-line front-end.

    hydrofriction force2 --omega-p 1e16 --beta 1e6 --omega-b 1e16 --z 10e-9 --v 5e6
    hydrofriction sweep --u-range 1:20:20 --omega-tilde 1,5 --z-tilde 10,100 --format csv --out sweep.csv
    hydrofriction validate --skip-force4

Physical flags are SI numbers. Default quadrature tolerances: rel 1e-8 for 1D
integrals, 1e-6 for the nested two-photon integral.

Exit codes: 0 success, 1 configuration or domain error, 2 quadrature did not
converge, 3 validation failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
import time
from collections.abc import Callable
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from hydrofriction import __version__
from hydrofriction.config import FORMATS, RunConfig, build_config, load_config_file, parse_u_range
from hydrofriction.dispersion import AtomParams, DimensionlessPoint, Kinematics, MaterialParams
from hydrofriction.errors import ConfigError, ConvergenceError, DomainError, ValidityError
from hydrofriction.friction2 import casimir_polder, force2_nondispersive, force2_raw, h_poly, threshold_w0
from hydrofriction.friction4 import (
    DERIVATIVE_MODES,
    decay_and_shift,
    force4_assemble,
    force4_two_photon,
    gamma_g,
    resonance_min,
)
from hydrofriction.numerics import QuadratureSpec, bessel_k, principal_value_1d
from hydrofriction.oracle import oracle_bessel_k, oracle_force2, oracle_force4_mc, oracle_gamma_g
from hydrofriction.sweep import CSV_COLUMNS, SCHEMA_VERSION, SweepRunner, run_sweep, write_csv

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NOT_CONVERGED = 2
EXIT_VALIDATION = 3

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

FIG2_OMEGA_TILDE = (1.0, 5.0)
FIG2_Z_TILDE = (10.0, 100.0)
FIG2_U_RANGE = (1.0, 20.0, 200)
H_SAMPLE_U = (0.5, 2.0)


def setup_logging(verbose: bool = False, log_file: str | Path | None = None) -> None:
    """Configure the root logger: stderr always, plus an appending log file when given."""
    handlers: list[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    if log_file:
        handlers.append(logging.FileHandler(log_file, mode="a"))
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format=LOG_FORMAT,
        handlers=handlers,
        force=True,
    )


class _ArgumentParser(argparse.ArgumentParser):
    """argparse with usage errors reported as ConfigError (exit code 1)."""

    def error(self, message):
        raise ConfigError("arguments", message)


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from e


def _u_range(text: str) -> tuple[float, float, int]:
    try:
        return parse_u_range(text)
    except ConfigError as e:
        raise argparse.ArgumentTypeError(str(e)) from e


def _common_parser() -> argparse.ArgumentParser:
    common = _ArgumentParser(add_help=False)
    phys = common.add_argument_group("physical parameters (SI)")
    phys.add_argument("--omega-p", type=float, help="plasma frequency [rad/s] (default 1e16)")
    phys.add_argument("--beta", type=float, help="sound speed [m/s] (default 1e6)")
    phys.add_argument("--omega-b", type=float, help="atomic transition frequency [rad/s] (default 1e16)")
    phys.add_argument("--alpha", type=float, help="static polarizability [m^3] (default 4.5 a0^3)")
    phys.add_argument("--z", type=float, help="gap distance [m]")
    speed = phys.add_mutually_exclusive_group()
    speed.add_argument("--v", type=float, help="atom speed [m/s]")
    speed.add_argument("--u", type=_float_list, help="reduced speed(s) v/beta, comma-separated")
    phys.add_argument("--u-range", type=_u_range, help="reduced speeds lo:hi:n (sweeps)")
    phys.add_argument("--omega-tilde", type=_float_list, help="omega_p/omega_b value(s) (sweeps)")
    phys.add_argument("--z-tilde", type=_float_list, help="z omega_p/beta value(s) (sweeps)")
    phys.add_argument("--t", type=float, help="time since the motion started [s] (force4)")

    run = common.add_argument_group("run options")
    run.add_argument("--config", type=Path, help="key = value unit config file")
    run.add_argument("--out", type=Path, help="output file (directory for fig2); stdout when absent")
    run.add_argument("--format", choices=FORMATS, help="output format (default json)")
    run.add_argument("--rel-tol", type=float, help="relative quadrature tolerance (default 1e-8)")
    run.add_argument("--seed", type=int, help="Monte Carlo seed (default 12345)")
    run.add_argument("--threads", type=int, help="worker threads (default HYDROFRICTION_THREADS or CPU count)")
    run.add_argument("--verbose", "-v", action="store_true", help="debug logging")
    run.add_argument("--log-file", type=Path, help="append log records to this file")
    return common


CONFIG_FLAGS = (
    "omega_p", "beta", "omega_b", "alpha", "z", "v", "u", "u_range",
    "omega_tilde", "z_tilde", "t", "rel_tol", "seed", "format", "out", "threads",
)


def config_from_args(args: argparse.Namespace) -> RunConfig:
    file_values = load_config_file(args.config) if getattr(args, "config", None) else None
    flags = {key: getattr(args, key, None) for key in CONFIG_FLAGS}
    return build_config(file_values, flags)


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------


def _flatten(record: dict, prefix: str = "") -> dict:
    flat = {}
    for key, value in record.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(_flatten(value, f"{name}."))
        elif isinstance(value, (list, tuple)):
            flat[name] = ";".join("" if x is None else repr(x) for x in value)
        else:
            flat[name] = value
    return flat


def _csv_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def emit_records(records: list[dict], config: RunConfig, many: bool = False) -> None:
    """Write records as JSON or CSV to config.out or stdout.

    JSON output is a single object unless ``many`` is set or there are several records.
    """
    if config.format == "json":
        payload = records if many or len(records) != 1 else records[0]
        text = json.dumps(payload, indent=2) + "\n"
    else:
        rows = [_flatten(r) for r in records]
        header = list(rows[0]) if rows else []
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_csv_cell(row.get(h)) for h in header])
        text = buffer.getvalue()

    if config.out is None:
        sys.stdout.write(text)
        return
    try:
        Path(config.out).write_text(text)
    except OSError as e:
        raise ConfigError("out", f"cannot write {config.out}: {e}") from e
    logger.info(f"Wrote {len(records)} record(s) to {config.out}")


def _record(command: str, config: RunConfig, m: MaterialParams, a: AtomParams, kin: Kinematics) -> dict:
    record = {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "omega_p_rad_per_s": m.omega_p,
        "beta_m_per_s": m.beta,
        "omega_b_rad_per_s": a.omega_b,
        "alpha_m3": a.alpha,
        "z_m": kin.z,
        "v_m_per_s": kin.v,
    }
    if m.is_dispersive:
        record.update(u=kin.v / m.beta, omega_tilde=m.omega_p / a.omega_b, z_tilde=kin.z * m.omega_p / m.beta)
    return record


def _single_point(config: RunConfig) -> tuple[MaterialParams, AtomParams, Kinematics]:
    m, a, kin = config.material(), config.atom(), config.kinematics()
    config.check_soft_bounds()
    return m, a, kin


def _spec(config: RunConfig) -> QuadratureSpec:
    return QuadratureSpec(rel_tol=config.rel_tol)


def _status(converged: bool, what: str) -> int:
    if converged:
        return EXIT_OK
    logger.error(f"{what}: quadrature did not converge; the reported value is a best estimate")
    return EXIT_NOT_CONVERGED


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_force2(config: RunConfig, args: argparse.Namespace) -> int:
    m, a, kin = _single_point(config)
    result = force2_raw(m, a, kin, _spec(config), path=args.path)
    emit_records([{**_record("force2", config, m, a, kin), **result.to_dict()}], config)
    return _status(result.converged, "force2")


def cmd_nondispersive(config: RunConfig, args: argparse.Namespace) -> int:
    m, a, kin = config.material(), config.atom(), config.kinematics()
    f = force2_nondispersive(m, a, kin)
    record = _record("nondispersive", config, m, a, kin)
    record.update(f2_normalized=f, f2_raw_N=f * abs(casimir_polder(a, kin.z)))
    emit_records([record], config)
    return EXIT_OK


def cmd_gamma(config: RunConfig, args: argparse.Namespace) -> int:
    m, a, kin = _single_point(config)
    result = gamma_g(m, a, kin, _spec(config))
    record = _record("gamma", config, m, a, kin)
    record.update(
        gamma_g_per_s=result.value,
        quadrature=result.quadrature.to_dict(),
        threshold=result.threshold.to_dict() if result.threshold else None,
    )
    emit_records([record], config)
    return _status(result.converged, "gamma_g")


def cmd_shift(config: RunConfig, args: argparse.Namespace) -> int:
    m, a, kin = _single_point(config)
    result = decay_and_shift(m, a, kin, _spec(config))
    record = _record("shift", config, m, a, kin)
    record.update(
        gamma_g_per_s=result.gamma_g,
        delta_omega_g_rad_per_s=result.delta_omega_g,
        quadrature={k: v.to_dict() for k, v in result.diagnostics.items()},
    )
    emit_records([record], config)
    return _status(all(v.converged for v in result.diagnostics.values()), "delta_omega_g")


def cmd_resonance(config: RunConfig, args: argparse.Namespace) -> int:
    m, a, kin = _single_point(config)
    report = resonance_min(m, kin, grid_n=args.grid_n)
    emit_records([{**_record("resonance", config, m, a, kin), **report.to_dict()}], config)
    return EXIT_OK


def cmd_force4(config: RunConfig, args: argparse.Namespace) -> int:
    m, a, kin = _single_point(config)
    result = force4_assemble(
        m,
        a,
        kin,
        config.t,
        _spec(config),
        derivative=args.derivative,
        include_two_photon=not args.skip_two_photon,
    )
    emit_records([{**_record("force4", config, m, a, kin), **result.to_dict()}], config)
    return _status(result.converged, "force4")


def _fig2_path(out_dir: Path, omega_tilde: float, z_tilde: float) -> Path:
    return out_dir / f"force2_omega_tilde_{omega_tilde:g}_z_tilde_{z_tilde:g}.csv"


def cmd_fig2(config: RunConfig, args: argparse.Namespace) -> int:
    """Normalized force vs u for omega_tilde in {1, 5} and z_tilde in {10, 100}."""
    out_dir = Path(config.out) if config.out is not None else Path("fig2")
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ConfigError("out", f"cannot create {out_dir}: {e}") from e

    us = np.linspace(*FIG2_U_RANGE[:2], FIG2_U_RANGE[2])
    curves = [(ot, zt) for ot in FIG2_OMEGA_TILDE for zt in FIG2_Z_TILDE]
    points = [DimensionlessPoint(u=float(u), omega_tilde=ot, z_tilde=zt) for ot, zt in curves for u in us]
    spec = _spec(config)

    def evaluate(point: DimensionlessPoint):
        m, a, kin = config.physical(point)
        return force2_raw(m, a, kin, spec)

    runner = SweepRunner(evaluate, workers=config.worker_count(len(points)))
    results = runner.run(points)

    converged = runner.failures == 0
    for c, (ot, zt) in enumerate(curves):
        path = _fig2_path(out_dir, ot, zt)
        chunk = results[c * len(us):(c + 1) * len(us)]
        try:
            with open(path, "w", newline="") as f:
                writer = csv.writer(f, lineterminator="\n")
                writer.writerow(["u", "f2_normalized", "f2_raw_N", "threshold_w0"])
                for u, r in zip(us, chunk):
                    if r is None:
                        writer.writerow([repr(float(u)), "nan", "nan", ""])
                        continue
                    converged = converged and r.converged
                    w0 = "" if r.threshold.w0 is None else repr(r.threshold.w0)
                    writer.writerow([repr(float(u)), repr(r.normalized_value), repr(r.raw_value), w0])
        except OSError as e:
            raise ConfigError("out", f"cannot write {path}: {e}") from e
        logger.info(f"Wrote {path}")

    if args.with_h:
        write_h_samples(out_dir / "h_samples.csv", (config.omega_tilde or [1.0])[0])
    return _status(converged, "fig2")


def write_h_samples(path: Path, omega_tilde: float, n: int = 200) -> None:
    """h(w) on [1/sqrt(2), 3 w_max] for one subsonic and one supersonic speed."""
    w0 = threshold_w0(max(H_SAMPLE_U), omega_tilde).w0
    ws = np.linspace(1.0 / math.sqrt(2.0), 3.0 * w0, n)
    columns = [h_poly(ws, u, omega_tilde) for u in H_SAMPLE_U]
    try:
        with open(path, "w", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(["w"] + [f"h_u_{u:g}" for u in H_SAMPLE_U])
            for i, w in enumerate(ws):
                writer.writerow([repr(float(w))] + [repr(float(col[i])) for col in columns])
    except OSError as e:
        raise ConfigError("out", f"cannot write {path}: {e}") from e


def cmd_sweep(config: RunConfig, args: argparse.Namespace) -> int:
    rows, _ = run_sweep(config, skip_force4=args.skip_force4)
    if config.format == "csv":
        if config.out is None:
            writer = csv.writer(sys.stdout, lineterminator="\n")
            writer.writerow(list(CSV_COLUMNS.values()))
            for row in rows:
                writer.writerow(row.to_csv())
        else:
            # read_completed already vetted any existing header
            write_csv(Path(config.out), rows, append=True)
    else:
        emit_records([row.to_record() for row in rows], config, many=True)
    return _status(all(row.converged for row in rows), "sweep")


# ---------------------------------------------------------------------------
# Validation suite
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "detail": self.detail}


def _relative(a: float, b: float) -> float:
    return abs(a - b) / max(abs(b), 1e-300)


def _reference_point(config: RunConfig, u: float, omega_tilde: float = 1.0, z_tilde: float = 10.0):
    return config.physical(DimensionlessPoint(u=u, omega_tilde=omega_tilde, z_tilde=z_tilde))


def check_threshold(config: RunConfig) -> CheckResult:
    rng = np.random.default_rng(config.seed)
    bad = []
    for u in rng.uniform(1e-3, 1.0, 100):
        ot, zt = rng.uniform(0.5, 10.0), rng.uniform(10.0, 1000.0)
        m, a, kin = _reference_point(config, float(u), float(ot), float(zt))
        f = force2_raw(m, a, kin).normalized_value
        g = gamma_g(m, a, kin).value
        if f != 0.0 or g != 0.0:
            bad.append((float(u), f, g))
    return CheckResult("threshold u <= 1", not bad, f"{len(bad)} nonzero of 100")


def check_force2_oracle(config: RunConfig) -> CheckResult:
    m, a, kin = _reference_point(config, 5.0)
    main = force2_raw(m, a, kin, _spec(config)).raw_value
    ref = oracle_force2(m, a, kin)
    rel = _relative(main, ref)
    return CheckResult("force2 vs oracle", rel <= 1e-3, f"rel {rel:.2e} (main {main:.6e} N, oracle {ref:.6e} N)")


def check_gamma_oracle(config: RunConfig) -> CheckResult:
    m, a, kin = _reference_point(config, 5.0)
    main = gamma_g(m, a, kin, _spec(config)).value
    ref = oracle_gamma_g(m, a, kin)
    rel = _relative(main, ref)
    return CheckResult("gamma_g vs oracle", rel <= 1e-3, f"rel {rel:.2e} (main {main:.6e}, oracle {ref:.6e} 1/s)")


def check_nondispersive(config: RunConfig) -> CheckResult:
    a = AtomParams(omega_b=1e16)
    kin = Kinematics(v=5e6, z=10e-9)
    limit = force2_nondispersive(MaterialParams(1e16, 0.0), a, kin)
    devs = [
        _relative(force2_raw(MaterialParams(1e16, beta), a, kin).normalized_value, limit)
        for beta in (1e5, 3e4, 1e4, 1e3)
    ]
    ok = all(x > y for x, y in zip(devs, devs[1:])) and devs[-1] <= 1e-2
    return CheckResult("beta -> 0 limit", ok, "deviations " + ", ".join(f"{d:.2e}" for d in devs))


def check_resonance(config: RunConfig) -> CheckResult:
    bad = []
    for u in (0.5, 0.9, 0.99):
        m, _, kin = _reference_point(config, u)
        report = resonance_min(m, kin, grid_n=400)
        if report.feasible or report.grid_min < math.sqrt(2.0) * m.omega_p * (1.0 - u) * (1.0 - 1e-9):
            bad.append(u)
    m, _, kin = _reference_point(config, 3.0)
    if not resonance_min(m, kin, grid_n=400).feasible:
        bad.append(3.0)
    return CheckResult("two-photon feasibility", not bad, f"failing u: {bad}" if bad else "ok")


def check_special_functions(config: RunConfig) -> CheckResult:
    worst = 0.0
    for x in np.logspace(-1, math.log10(50.0), 50):
        for n in (1, 2):
            worst = max(worst, _relative(bessel_k(n, float(x)), oracle_bessel_k(n, float(x))))
    pv0 = principal_value_1d(lambda x: 1.0 / (x - 1.0), 1.0, 0.0, 2.0).value
    pv1 = principal_value_1d(lambda x: x / (x - 1.0), 1.0, 0.0, 2.0).value
    ok = worst <= 1e-10 and abs(pv0) <= 1e-10 and abs(pv1 - 2.0) <= 1e-10
    return CheckResult("special functions", ok, f"bessel rel {worst:.1e}, pv {pv0:.1e}, {pv1 - 2.0:.1e}")


def check_force4_mc(config: RunConfig) -> CheckResult:
    m, a, kin = _reference_point(config, 3.0)
    main = force4_two_photon(m, a, kin)
    mc = oracle_force4_mc(m, a, kin, seed=config.seed)
    sigma = math.hypot(mc.std_error, main.quadrature.error_estimate)
    ok = abs(main.value - mc.value) <= 3.0 * sigma and not mc.inconclusive and mc.std_error <= 0.1 * abs(mc.value)
    return CheckResult(
        "force4 two-photon vs Monte Carlo",
        ok,
        f"main {main.value:.4e} N, MC {mc.value:.4e} +/- {mc.std_error:.1e} N",
    )


CHECKS: tuple[Callable[[RunConfig], CheckResult], ...] = (
    check_threshold,
    check_special_functions,
    check_resonance,
    check_nondispersive,
    check_force2_oracle,
    check_gamma_oracle,
)


def run_checks(config: RunConfig, skip_force4: bool = False) -> list[CheckResult]:
    checks = list(CHECKS) if skip_force4 else [*CHECKS, check_force4_mc]
    results = []
    for check in checks:
        started = time.monotonic()
        try:
            result = check(config)
        except Exception as e:
            logger.error(f"Validation check {check.__name__} raised: {e}", exc_info=True)
            result = CheckResult(check.__name__, False, f"raised {type(e).__name__}: {e}")
        logger.info(
            f"{'PASS' if result.passed else 'FAIL'} {result.name}: {result.detail} "
            f"({time.monotonic() - started:.1f} s)"
        )
        results.append(result)
    return results


def cmd_validate(config: RunConfig, args: argparse.Namespace) -> int:
    results = run_checks(config, skip_force4=args.skip_force4)
    emit_records(
        [{"schema_version": SCHEMA_VERSION, "command": "validate", "checks": [r.to_dict() for r in results]}],
        config,
    )
    failed = [r.name for r in results if not r.passed]
    if failed:
        logger.error(f"Validation failed: {', '.join(failed)}")
        return EXIT_VALIDATION
    return EXIT_OK


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = _ArgumentParser(
        prog="hydrofriction",
        description="Quantum friction on an atom moving above a hydrodynamic metal.",
        epilog="Exit codes: 0 ok, 1 configuration error, 2 non-convergence, 3 validation failure.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("force2", parents=[common], help="second-order friction at one point")
    p.add_argument("--path", choices=("w", "k"), default="w", help="integration variable (default w)")
    p.set_defaults(func=cmd_force2)

    p = sub.add_parser("nondispersive", parents=[common], help="beta -> 0 analytic limit")
    p.set_defaults(func=cmd_nondispersive)

    p = sub.add_parser("gamma", parents=[common], help="ground-state decay rate")
    p.set_defaults(func=cmd_gamma)

    p = sub.add_parser("shift", parents=[common], help="ground-state level shift (and decay rate)")
    p.set_defaults(func=cmd_shift)

    p = sub.add_parser("resonance", parents=[common], help="two-photon resonance feasibility")
    p.add_argument("--grid-n", type=int, default=400, help="grid points per axis (default 400)")
    p.set_defaults(func=cmd_resonance)

    p = sub.add_parser("force4", parents=[common], help="fourth-order force at time --t")
    p.add_argument("--derivative", choices=DERIVATIVE_MODES, default="rate")
    p.add_argument("--skip-two-photon", action="store_true", help="omit the two-photon channel")
    p.set_defaults(func=cmd_force4)

    p = sub.add_parser("fig2", aliases=["curves"], parents=[common], help="force vs u curves; --out is a directory")
    p.add_argument("--with-h", action="store_true", help="also write h(w) samples for u = 0.5 and 2")
    p.set_defaults(func=cmd_fig2)

    p = sub.add_parser("sweep", parents=[common], help="grid over u x omega_tilde x z_tilde")
    p.add_argument("--with-force4", dest="skip_force4", action="store_false",
                   help="also compute the two-photon force (slow)")
    p.set_defaults(func=cmd_sweep, skip_force4=True)

    p = sub.add_parser("validate", parents=[common], help="oracle cross-checks")
    p.add_argument("--skip-force4", action="store_true", help="skip the Monte Carlo two-photon check")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except ConfigError as e:
        print(f"hydrofriction: error: {e}", file=sys.stderr)
        return EXIT_CONFIG

    setup_logging(args.verbose, args.log_file)
    try:
        config = config_from_args(args)
        return args.func(config, args)
    except (ConfigError, DomainError, ValidityError) as e:
        logger.error(str(e))
        return EXIT_CONFIG
    except ConvergenceError as e:
        logger.error(str(e))
        return EXIT_NOT_CONVERGED


if __name__ == "__main__":
    sys.exit(main())
