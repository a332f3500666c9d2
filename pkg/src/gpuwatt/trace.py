"""Power-trace value types and the rectangle-rule energy estimator.

A trace is an immutable, strictly time-ordered sequence of (t, power)
samples with a declared sampling interval. Energy over a window is the
left-aligned rectangle sum ``sum(interval * p)`` over samples falling in the
half-open window ``[t_start, t_end)``; the mean-energy estimator averages
idle-corrected per-iteration energies and divides by the number of
back-to-back executions per iteration.
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .errors import (
    EmptyWindow,
    MismatchedInterval,
    NegativeEnergyWarning,
    NonMonotoneTimestamps,
)

TRACE_HEADER = ("t_s", "power_w")
WINDOW_HEADER = ("t_start", "t_end")


@dataclass(frozen=True, slots=True)
class PowerSample:
    """One instantaneous power readout at ``t`` seconds from trace start."""

    t: float
    p: float

    def __post_init__(self):
        if not (self.t >= 0.0):
            raise ValueError(f"sample time must be >= 0, got {self.t}")
        if not (self.p >= 0.0):
            raise ValueError(f"power must be >= 0 W, got {self.p}")


@dataclass(frozen=True)
class PowerTrace:
    """Ordered power samples from one acquisition run.

    ``sample_interval`` is the declared sampling time (1/f_s) used by the
    rectangle rule; it is not re-derived from the timestamps.
    """

    samples: tuple[PowerSample, ...]
    sample_interval: float
    source_id: str = ""

    def __post_init__(self):
        object.__setattr__(self, "samples", tuple(self.samples))
        if not (self.sample_interval > 0.0):
            raise ValueError(f"sample_interval must be > 0, got {self.sample_interval}")
        ts = [s.t for s in self.samples]
        for a, b in zip(ts, ts[1:]):
            if not (b > a):
                raise NonMonotoneTimestamps(
                    f"timestamps must be strictly increasing, got {a} then {b}"
                )

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def t_start(self) -> float:
        return self.samples[0].t

    @property
    def t_end(self) -> float:
        return self.samples[-1].t

    def in_window(self, window: "MeasurementWindow") -> tuple[PowerSample, ...]:
        return tuple(s for s in self.samples if window.t_start <= s.t < window.t_end)


@dataclass(frozen=True, slots=True)
class MeasurementWindow:
    """Half-open time window ``[t_start, t_end)`` in trace coordinates."""

    t_start: float
    t_end: float

    def __post_init__(self):
        if not (self.t_end > self.t_start):
            raise ValueError(f"window end {self.t_end} must exceed start {self.t_start}")


@dataclass(frozen=True, slots=True)
class EnergyEstimate:
    """Aggregated outcome of one measurement: mean per-execution energy."""

    mean_energy_j: float
    k_iterations: int
    m_repetitions: int

    def __post_init__(self):
        if self.k_iterations < 1 or self.m_repetitions < 1:
            raise ValueError("k_iterations and m_repetitions must be >= 1")


@dataclass(frozen=True, slots=True)
class EnergyRecord:
    """One measured mean energy for a (network, quality, image) modality.

    ``mean_energy_j`` may be negative on degenerate traces (idle exceeding
    the measured draw); producers flag this with a warning rather than
    rejecting the record.
    """

    network_id: str
    quality_level: int
    image_id: str
    pixels: int
    mean_energy_j: float
    k_iterations: int
    m_repetitions: int

    def __post_init__(self):
        if self.pixels <= 0:
            raise ValueError(f"pixels must be > 0, got {self.pixels}")
        if self.k_iterations < 1 or self.m_repetitions < 1:
            raise ValueError("k_iterations and m_repetitions must be >= 1")


def integrate_energy(trace: PowerTrace, window: MeasurementWindow) -> float:
    """Rectangle-rule energy in joules over the samples inside ``window``.

    Each in-window sample contributes ``sample_interval * p``. Membership is
    half-open, so sample-aligned partitions of a window sum exactly to the
    whole-window energy.

    Raises:
        EmptyWindow: no samples fall inside the window.
    """
    selected = trace.in_window(window)
    if not selected:
        raise EmptyWindow(
            f"no samples in [{window.t_start}, {window.t_end}) for trace "
            f"spanning [{trace.t_start if len(trace) else '-'}, "
            f"{trace.t_end if len(trace) else '-'}]"
        )
    return trace.sample_interval * math.fsum(s.p for s in selected)


def idle_energy(p_idle: float, n_samples: int, sample_interval: float) -> float:
    """Baseline energy ``n_samples * sample_interval * p_idle`` in joules."""
    if p_idle < 0 or n_samples < 0 or sample_interval < 0:
        raise ValueError("idle_energy arguments must be non-negative")
    return n_samples * sample_interval * p_idle


def compute_mean_energy(
    iterations: Sequence[tuple[PowerTrace, MeasurementWindow]],
    p_idle: float,
    m: int,
) -> EnergyEstimate:
    """Mean per-execution dynamic energy over K measurement iterations.

    For each iteration the in-window rectangle energy is reduced by the idle
    baseline of the same sample count, then divided by the number of
    back-to-back executions ``m``; the K per-iteration values are averaged.
    The in-window sample count is taken per iteration, so iterations of
    slightly different length are each corrected with their own baseline.

    Raises:
        EmptyWindow: an iteration window contains no samples.
        MismatchedInterval: iterations disagree on the sample interval.
    """
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    if not iterations:
        raise ValueError("at least one iteration is required")
    interval = iterations[0][0].sample_interval
    per_iteration = []
    for trace, window in iterations:
        if trace.sample_interval != interval:
            raise MismatchedInterval(
                f"sample interval {trace.sample_interval} differs from {interval}"
            )
        n_k = len(trace.in_window(window))
        gross = integrate_energy(trace, window)
        per_iteration.append((gross - idle_energy(p_idle, n_k, interval)) / m)
    mean = math.fsum(per_iteration) / len(per_iteration)
    if mean < 0:
        warnings.warn(
            f"net energy {mean:.6g} J is negative: idle baseline exceeds the "
            "measured draw, check the acquisition",
            NegativeEnergyWarning,
            stacklevel=2,
        )
    return EnergyEstimate(mean, k_iterations=len(per_iteration), m_repetitions=m)


def write_trace(trace: PowerTrace, path: str | Path) -> None:
    """Write the trace CSV (header ``t_s,power_w``) with full float precision."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_HEADER)
        for s in trace.samples:
            writer.writerow([repr(s.t), repr(s.p)])


def write_windows(windows: Iterable[MeasurementWindow], path: str | Path) -> None:
    """Write the windows CSV (header ``t_start,t_end``)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(WINDOW_HEADER)
        for w in windows:
            writer.writerow([repr(w.t_start), repr(w.t_end)])
