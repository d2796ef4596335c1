"""
Parameter sweeps over (u, omega_tilde, z_tilde).

Points are evaluated on a small pool of worker threads fed from a queue; results
are kept by input index so the output order never depends on completion order.
CSV output is resumable: rows already present in the output file are skipped
and new rows are appended.
"""

from __future__ import annotations

import csv
import logging
import math
import queue
import threading
from collections.abc import Callable, Sequence
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any

from hydrofriction.config import RunConfig
from hydrofriction.dispersion import DimensionlessPoint
from hydrofriction.errors import ConfigError
from hydrofriction.friction2 import force2_raw
from hydrofriction.friction4 import delta_omega_g, force4_two_photon, gamma_g
from hydrofriction.numerics import NESTED_SPEC, QuadratureResult, QuadratureSpec

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1

# SweepRow field -> CSV column (SI units in the name)
CSV_COLUMNS = {
    "u": "u",
    "omega_tilde": "omega_tilde",
    "z_tilde": "z_tilde",
    "f2_normalized": "f2_normalized",
    "f2_raw": "f2_raw_N",
    "gamma_g": "gamma_g_per_s",
    "delta_omega_g": "delta_omega_g_rad_per_s",
    "f4_two_photon": "f4_two_photon_N",
    "threshold_w0": "threshold_w0",
    "quadrature_error": "quadrature_error",
    "converged": "converged",
}
KEY_COLUMNS = ("u", "omega_tilde", "z_tilde")


@dataclass(frozen=True)
class SweepRow:
    u: float
    omega_tilde: float
    z_tilde: float
    f2_normalized: float
    f2_raw: float
    gamma_g: float
    delta_omega_g: float
    f4_two_photon: float | None
    threshold_w0: float | None
    quadrature_error: float
    converged: bool

    @classmethod
    def failed(cls, point: DimensionlessPoint) -> SweepRow:
        nan = math.nan
        return cls(point.u, point.omega_tilde, point.z_tilde, nan, nan, nan, nan, None, None, nan, False)

    def key(self) -> tuple[str, str, str]:
        return tuple(format_value(getattr(self, k)) for k in KEY_COLUMNS)

    def to_record(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, **asdict(self)}

    def to_csv(self) -> list[str]:
        return [format_value(getattr(self, name)) for name in CSV_COLUMNS]


def format_value(value: Any) -> str:
    """Locale-free text for a CSV cell; floats use the shortest round-trip repr."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def point_key(point: DimensionlessPoint) -> tuple[str, str, str]:
    return tuple(format_value(float(getattr(point, k))) for k in KEY_COLUMNS)


def relative_error(result: QuadratureResult) -> float:
    """Error estimate relative to |value|; the absolute estimate when the value is zero."""
    if result.value == 0.0:
        return result.error_estimate
    return result.error_estimate / abs(result.value)


def evaluate_point(
    config: RunConfig,
    point: DimensionlessPoint,
    skip_force4: bool = True,
) -> SweepRow:
    """All SweepRow quantities at one point, with config's omega_p and beta.

    quadrature_error is the largest relative error estimate over the channels
    computed, matching converged, which requires every channel.
    """
    m, a, kin = config.physical(point)
    spec = QuadratureSpec(rel_tol=config.rel_tol)
    f2 = force2_raw(m, a, kin, spec)
    g = gamma_g(m, a, kin, spec)
    s = delta_omega_g(m, a, kin, spec)
    errors = [f2.quadrature, g.quadrature, s.quadrature]

    f4 = None
    if not skip_force4 and point.u > 1.0:
        tp = force4_two_photon(m, a, kin, spec=QuadratureSpec(rel_tol=max(config.rel_tol, NESTED_SPEC.rel_tol)))
        f4 = tp.value
        errors.append(tp.quadrature)

    return SweepRow(
        u=point.u,
        omega_tilde=point.omega_tilde,
        z_tilde=point.z_tilde,
        f2_normalized=f2.normalized_value,
        f2_raw=f2.raw_value,
        gamma_g=g.value,
        delta_omega_g=s.value,
        f4_two_photon=f4,
        threshold_w0=f2.threshold.w0,
        quadrature_error=max(relative_error(r) for r in errors),
        converged=all(r.converged for r in errors),
    )


class SweepRunner:
    """Evaluate items on a bounded pool of daemon threads.

    Each worker pulls (index, item) pairs from a shared queue until the runner
    stops it. A failing item is logged and recorded as ``on_error(item)``; the
    worker moves on to the next item.
    """

    def __init__(
        self,
        evaluate: Callable[[Any], Any],
        workers: int = 1,
        on_error: Callable[[Any], Any] | None = None,
        poll_timeout: float = 0.1,
    ):
        if workers < 1:
            raise ConfigError("threads", f"must be at least 1, got {workers}")
        self.evaluate = evaluate
        self.workers = workers
        self.on_error = on_error
        self.poll_timeout = poll_timeout
        self.running = False
        self.failures = 0
        self._queue: queue.Queue = queue.Queue()
        self._lock = threading.Lock()

    def _work(self, results: list) -> None:
        while self.running:
            try:
                index, item = self._queue.get(timeout=self.poll_timeout)
            except queue.Empty:
                continue
            try:
                results[index] = self.evaluate(item)
                logger.debug(f"sweep item {index} done")
            except Exception as e:
                logger.error(f"Error evaluating sweep item {index} ({item}): {e}", exc_info=True)
                with self._lock:
                    self.failures += 1
                results[index] = self.on_error(item) if self.on_error else None
            finally:
                self._queue.task_done()

    def run(self, items: Sequence[Any]) -> list:
        """Evaluate all items; results are returned in input order."""
        results: list = [None] * len(items)
        if not items:
            return results
        for index, item in enumerate(items):
            self._queue.put((index, item))

        self.running = True
        threads = [
            threading.Thread(target=self._work, args=(results,), name=f"sweep-worker-{n}", daemon=True)
            for n in range(min(self.workers, len(items)))
        ]
        logger.info(f"Sweep started: {len(items)} point(s) on {len(threads)} worker(s)")
        for thread in threads:
            thread.start()
        try:
            self._queue.join()
        finally:
            self.stop()
            for thread in threads:
                thread.join()
        logger.info(f"Sweep finished: {len(items) - self.failures} ok, {self.failures} failed")
        return results

    def stop(self) -> None:
        self.running = False


def read_completed(path: Path) -> set[tuple[str, str, str]]:
    """Keys of rows already present in a sweep CSV; empty when the file is absent.

    Rows left by a failed evaluation (NaN values, converged = false) do not count,
    so a resumed sweep evaluates those points again and appends the new rows after
    them. Readers should take the last row for a key.
    """
    if not path.exists() or path.stat().st_size == 0:
        return set()
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != list(CSV_COLUMNS.values()):
            raise ConfigError("out", f"{path} exists with a different header; refusing to append")
        done = set()
        retry = 0
        for row in reader:
            if not row:
                continue
            if is_failed_row(row):
                retry += 1
                continue
            done.add(tuple(row[:3]))
    if retry:
        logger.info(f"{retry} failed row(s) in {path} will be evaluated again")
    return done


def is_failed_row(cells: Sequence[str]) -> bool:
    """True for a CSV row written by SweepRow.failed."""
    record = dict(zip(CSV_COLUMNS.values(), cells))
    return record.get("converged") == "false" and record.get("f2_normalized", "").lower() == "nan"


def write_csv(path: Path, rows: Sequence[SweepRow], append: bool = False) -> None:
    """Write (or append) rows; the header is written when the file is new or empty."""
    new_file = not append or not path.exists() or path.stat().st_size == 0
    try:
        with open(path, "a" if append else "w", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            if new_file:
                writer.writerow(list(CSV_COLUMNS.values()))
            for row in rows:
                writer.writerow(row.to_csv())
    except OSError as e:
        raise ConfigError("out", f"cannot write {path}: {e}") from e


def run_sweep(config: RunConfig, skip_force4: bool = True) -> tuple[list[SweepRow], int]:
    """Evaluate the config's sweep, skipping points already in a CSV output.

    Returns:
        (new rows in input order, number of points skipped)
    """
    points = config.sweep_points()
    config.check_soft_bounds()

    skipped = 0
    if config.out is not None and config.format == "csv":
        done = read_completed(Path(config.out))
        if done:
            remaining = [p for p in points if point_key(p) not in done]
            skipped = len(points) - len(remaining)
            points = remaining
            logger.info(f"Resuming sweep: {skipped} point(s) already in {config.out}")

    runner = SweepRunner(
        lambda p: evaluate_point(config, p, skip_force4=skip_force4),
        workers=config.worker_count(len(points)),
        on_error=SweepRow.failed,
    )
    return runner.run(points), skipped
