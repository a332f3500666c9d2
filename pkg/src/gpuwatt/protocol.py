"""Measurement campaign orchestration.

A campaign measures one modality at a time: after an idle reference and a
preheat phase, each iteration acquires a power trace while the workload runs
M times back to back; iterations repeat until a Student-t confidence
interval on the per-execution energies is tight enough (or an iteration cap
is hit). Workload driving and power polling run concurrently and are joined
through explicit start/end timestamps.
"""
from __future__ import annotations

import csv
import math
import threading
import warnings
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Callable, Protocol, Sequence, runtime_checkable

from scipy import stats

from ._clock import Clock, SystemClock
from .errors import PreheatTimeout, SourceFailure, WorkloadFailure
from .sources import (
    PowerSource,
    acquire,
    collect_samples,
    finish_collection,
    rebase_samples,
)
from .trace import (
    EnergyEstimate,
    EnergyRecord,
    MeasurementWindow,
    PowerTrace,
    compute_mean_energy,
    idle_energy,
    integrate_energy,
)

RESULTS_HEADER = ("network_id", "quality", "image_id", "pixels", "mean_energy_j", "k", "m")


@dataclass(frozen=True)
class MeasurementPlan:
    """Campaign parameters.

    Defaults: a 120 s idle reference, preheat to 80 °C, batches of executions
    lasting more than 5 s, and a two-sided 99% Student-t interval that must
    shrink below 2% of the mean between 5 and 100 iterations.
    """

    idle_duration: float = 120.0
    preheat_target_c: float = 80.0
    min_batch_duration: float = 5.0
    k_min: int = 5
    k_max: int = 100
    confidence: float = 0.99
    rel_halfwidth: float = 0.02

    def __post_init__(self):
        if self.idle_duration <= 0:
            raise ValueError("idle_duration must be > 0")
        if self.min_batch_duration <= 0:
            raise ValueError("min_batch_duration must be > 0")
        if not (0.0 < self.confidence < 1.0):
            raise ValueError("confidence must be in (0, 1)")
        if self.rel_halfwidth <= 0:
            raise ValueError("rel_halfwidth must be > 0")
        if not (1 <= self.k_min <= self.k_max):
            raise ValueError("need 1 <= k_min <= k_max")


@runtime_checkable
class WorkloadHandle(Protocol):
    """One repeatable workload execution plus an optional temperature probe.

    ``run_once`` must be repeatable with statistically stationary duration
    after preheat; ``temperature`` returns degrees Celsius or None when the
    device exposes no sensor.
    """

    def run_once(self) -> float: ...

    def temperature(self) -> float | None: ...


@dataclass(frozen=True, slots=True)
class StoppingDecision:
    stop: bool
    k_so_far: int
    mean: float
    halfwidth: float

    def __post_init__(self):
        if self.halfwidth < 0:
            raise ValueError("halfwidth must be >= 0")


@lru_cache(maxsize=None)
def _t_quantile(confidence: float, dof: int) -> float:
    return float(stats.t.ppf(0.5 + confidence / 2.0, dof))


def run_idle_reference(
    source: PowerSource, plan: MeasurementPlan, clock: Clock | None = None
) -> float:
    """Mean power over ``plan.idle_duration`` with no workload running.

    The caller is responsible for the GPU actually being idle.
    """
    trace = acquire(source, plan.idle_duration, clock=clock)
    return math.fsum(s.p for s in trace.samples) / len(trace)


def preheat(
    workload: WorkloadHandle,
    plan: MeasurementPlan,
    timeout: float,
    clock: Clock | None = None,
) -> float | None:
    """Run the workload until the device reports the target temperature.

    Returns the last reading, or None when no sensor is available (in that
    case exactly ``plan.k_min`` warm-up repetitions are executed). Hitting
    ``timeout`` below target emits a :class:`PreheatTimeout` warning instead
    of failing: preheat only stabilizes static losses, so the campaign can
    proceed with the condition on record.
    """
    clock = clock or SystemClock()
    clock.register()
    try:
        t0 = clock.now()
        last: float | None = None
        runs = 0
        while True:
            workload.run_once()
            runs += 1
            last = workload.temperature()
            if last is None:
                while runs < plan.k_min:
                    workload.run_once()
                    runs += 1
                return None
            if last >= plan.preheat_target_c:
                return last
            if clock.now() - t0 >= timeout:
                warnings.warn(
                    f"preheat reached {last:.1f} °C after {runs} runs, target "
                    f"{plan.preheat_target_c:.1f} °C not met within {timeout} s",
                    PreheatTimeout,
                    stacklevel=2,
                )
                return last
    finally:
        clock.unregister()


def choose_m(single_run_s: float, plan: MeasurementPlan) -> int:
    """Smallest M with ``M * single_run_s`` strictly above the batch floor."""
    if single_run_s <= 0:
        raise ValueError("single_run_s must be > 0")
    m = int(plan.min_batch_duration // single_run_s) + 1
    while m * single_run_s <= plan.min_batch_duration:
        m += 1
    while m > 1 and (m - 1) * single_run_s > plan.min_batch_duration:
        m -= 1
    return m


def ci_stop_check(energies: Sequence[float], plan: MeasurementPlan) -> StoppingDecision:
    """Two-sided Student-t stop test on the running per-execution energies.

    Stops once at least ``k_min`` iterations exist and the interval halfwidth
    at ``plan.confidence`` is within ``rel_halfwidth * |mean|``, or
    unconditionally at ``k_max``.
    """
    k = len(energies)
    if k < 2:
        raise ValueError("ci_stop_check needs at least 2 energies")
    mean = math.fsum(energies) / k
    var = math.fsum((e - mean) ** 2 for e in energies) / (k - 1)
    halfwidth = _t_quantile(plan.confidence, k - 1) * math.sqrt(var / k)
    stop = (k >= plan.k_min and halfwidth <= plan.rel_halfwidth * abs(mean)) or k >= plan.k_max
    return StoppingDecision(stop=stop, k_so_far=k, mean=mean, halfwidth=halfwidth)


def run_until_stable(
    draw_energy: Callable[[int], float], plan: MeasurementPlan
) -> tuple[list[float], StoppingDecision]:
    """Collect per-iteration energies until :func:`ci_stop_check` stops.

    ``draw_energy`` is called with the iteration index; this loop is the one
    :func:`run_measurement` drives, factored out so stopping statistics can
    be simulated without hardware or threads.
    """
    energies: list[float] = []
    while True:
        energies.append(draw_energy(len(energies)))
        if len(energies) >= plan.k_max:
            decision = ci_stop_check(energies, plan) if len(energies) >= 2 else StoppingDecision(
                True, len(energies), energies[0], 0.0
            )
            return energies, decision
        if len(energies) >= 2:
            decision = ci_stop_check(energies, plan)
            if decision.stop:
                return energies, decision


def _measure_iteration(
    workload: WorkloadHandle,
    source: PowerSource,
    m: int,
    clock: Clock,
) -> tuple[PowerTrace, MeasurementWindow]:
    """Acquire one trace spanning M back-to-back executions.

    The window runs from the first execution's start to the last execution's
    end, excluding the device's performance-state tail after the runs.
    """
    stop = threading.Event()
    collector = None
    workload_error: Exception | None = None
    clock.register()
    try:
        collector = collect_samples(source, clock, stop)
        t_start = clock.now()
        try:
            for _ in range(m):
                workload.run_once()
        except Exception as exc:
            workload_error = exc
        t_end = clock.now()
    finally:
        clock.unregister()
    samples = finish_collection(collector) if collector is not None else []
    if workload_error is not None:
        raise workload_error
    trace = rebase_samples(samples, source.interval(), source_id=type(source).__name__)
    epoch = samples[0].t
    window = MeasurementWindow(t_start - epoch, t_end - epoch)
    return trace, window


def run_measurement(
    workload: WorkloadHandle,
    source: PowerSource,
    plan: MeasurementPlan,
    p_idle: float,
    m: int | None = None,
    clock: Clock | None = None,
) -> EnergyEstimate:
    """Full K x M measurement loop for one modality.

    If ``m`` is not given, one untimed probe execution sizes the batch via
    :func:`choose_m`. A workload failure aborts the current iteration and is
    retried once; a second failure raises :class:`WorkloadFailure`.
    """
    clock = clock or SystemClock()
    if m is None:
        clock.register()
        try:
            probe = workload.run_once()
        finally:
            clock.unregister()
        m = choose_m(probe, plan)
    iterations: list[tuple[PowerTrace, MeasurementWindow]] = []
    energies: list[float] = []
    while True:
        try:
            trace, window = _measure_iteration(workload, source, m, clock)
        except SourceFailure:
            raise
        except Exception:
            try:
                trace, window = _measure_iteration(workload, source, m, clock)
            except SourceFailure:
                raise
            except Exception as exc:
                raise WorkloadFailure(
                    "workload failed twice within one measurement iteration"
                ) from exc
        iterations.append((trace, window))
        n_k = len(trace.in_window(window))
        gross = integrate_energy(trace, window)
        energies.append((gross - idle_energy(p_idle, n_k, trace.sample_interval)) / m)
        if len(energies) >= plan.k_max:
            break
        if len(energies) >= 2 and ci_stop_check(energies, plan).stop:
            break
    return compute_mean_energy(iterations, p_idle, m)


def append_energy_record(path: str | Path, record: EnergyRecord) -> None:
    """Append one modality row to the results CSV, writing the header once."""
    path = Path(path)
    new = not path.exists() or path.stat().st_size == 0
    with open(path, "a", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        if new:
            writer.writerow(RESULTS_HEADER)
        writer.writerow(
            [
                record.network_id,
                record.quality_level,
                record.image_id,
                record.pixels,
                repr(record.mean_energy_j),
                record.k_iterations,
                record.m_repetitions,
            ]
        )


def read_energy_records(path: str | Path) -> list[EnergyRecord]:
    """Load a results CSV produced by :func:`append_energy_record`."""
    records: list[EnergyRecord] = []
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [c.strip() for c in header] != list(RESULTS_HEADER):
            raise ValueError(f"unexpected results header: {header!r}")
        for row in reader:
            if not row:
                continue
            records.append(
                EnergyRecord(
                    network_id=row[0],
                    quality_level=int(row[1]),
                    image_id=row[2],
                    pixels=int(row[3]),
                    mean_energy_j=float(row[4]),
                    k_iterations=int(row[5]),
                    m_repetitions=int(row[6]),
                )
            )
    return records
