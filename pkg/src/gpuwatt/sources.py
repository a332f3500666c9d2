"""Power-sample sources: live meter adapter, trace replay, synthetic traces.

Sources used with :func:`acquire` stamp samples with the shared clock's
absolute time; the assembled trace is re-based so its first sample sits at
t = 0. The live GPU meter stays behind :class:`CommandPowerSource`, which
shells out to a configurable query command, so no vendor library is linked
into the core.
"""
from __future__ import annotations

import csv
import math
import shlex
import statistics
import subprocess
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol, Sequence, runtime_checkable

import numpy as np

from ._clock import Clock, SystemClock
from .errors import NonMonotoneTimestamps, ParseError, SourceFailure
from .trace import MeasurementWindow, PowerSample, PowerTrace, TRACE_HEADER, WINDOW_HEADER

DEFAULT_SAMPLE_INTERVAL_S = 0.1  # 10 Hz meter readout


@runtime_checkable
class PowerSource(Protocol):
    """Behavioral contract for a pollable power meter.

    Successive ``poll()`` results must carry non-decreasing timestamps and
    ``interval()`` must stay constant over the source's lifetime. A source is
    polled from a single thread at a time.
    """

    def poll(self) -> PowerSample: ...

    def interval(self) -> float: ...


class CommandPowerSource:
    """Live-meter adapter that runs an external query command per poll.

    The command must print one power value in watts (first token of stdout).
    """

    def __init__(
        self,
        query_command: str,
        sample_interval_s: float = DEFAULT_SAMPLE_INTERVAL_S,
        clock: Clock | None = None,
    ):
        if not query_command:
            raise ValueError("query_command must be a non-empty command line")
        if sample_interval_s <= 0:
            raise ValueError("sample_interval_s must be > 0")
        self._command = query_command
        self._interval = sample_interval_s
        self._clock = clock or SystemClock()

    def poll(self) -> PowerSample:
        try:
            out = subprocess.run(
                shlex.split(self._command),
                capture_output=True,
                text=True,
                check=True,
                timeout=max(5.0, 10 * self._interval),
            ).stdout
            value = float(out.split()[0])
        except Exception as exc:
            raise SourceFailure(f"query command {self._command!r} failed: {exc}") from exc
        return PowerSample(t=self._clock.now(), p=max(value, 0.0))

    def interval(self) -> float:
        return self._interval


class SimulatedPowerSource:
    """Test meter whose power is a pure function of elapsed time."""

    def __init__(
        self,
        profile: Callable[[float], float],
        sample_interval_s: float = DEFAULT_SAMPLE_INTERVAL_S,
        clock: Clock | None = None,
    ):
        self._profile = profile
        self._interval = sample_interval_s
        self._clock = clock or SystemClock()
        self._epoch: float | None = None

    def poll(self) -> PowerSample:
        now = self._clock.now()
        if self._epoch is None:
            self._epoch = now
        return PowerSample(t=now, p=max(self._profile(now - self._epoch), 0.0))

    def interval(self) -> float:
        return self._interval


class ScriptedPowerSource:
    """Test meter replaying a fixed sample script; raises when exhausted.

    Entries may be PowerSample objects or Exception instances to inject
    failures at a given poll index.
    """

    def __init__(self, script: Sequence[PowerSample | Exception], sample_interval_s: float):
        self._script = list(script)
        self._interval = sample_interval_s
        self._i = 0

    def poll(self) -> PowerSample:
        if self._i >= len(self._script):
            raise SourceFailure("scripted source exhausted")
        item = self._script[self._i]
        self._i += 1
        if isinstance(item, Exception):
            raise item
        return item

    def interval(self) -> float:
        return self._interval


@dataclass(frozen=True)
class SyntheticTraceSpec:
    """Piecewise-constant trace recipe with optional Gaussian jitter.

    ``segments`` is a sequence of (duration_s, power_w, jitter_w_std) tuples.
    """

    segments: tuple[tuple[float, float, float], ...]
    sample_interval: float = DEFAULT_SAMPLE_INTERVAL_S
    rng_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(tuple(s) for s in self.segments))
        if not self.segments:
            raise ValueError("at least one segment is required")
        for duration, _power, jitter in self.segments:
            if duration <= 0:
                raise ValueError(f"segment duration must be > 0, got {duration}")
            if jitter < 0:
                raise ValueError(f"jitter must be >= 0, got {jitter}")
        if self.sample_interval <= 0:
            raise ValueError("sample_interval must be > 0")

    @property
    def total_duration(self) -> float:
        return math.fsum(seg[0] for seg in self.segments)


def synthesize_trace(spec: SyntheticTraceSpec, source_id: str = "synthetic") -> PowerTrace:
    """Deterministic trace for ``spec``: floor(total/interval) samples.

    Jitter is Gaussian with the segment's standard deviation, clamped at 0 W
    so the sample invariant holds.
    """
    rng = np.random.default_rng(spec.rng_seed)
    n = int(spec.total_duration / spec.sample_interval)
    boundaries = []
    acc = 0.0
    for duration, power, jitter in spec.segments:
        acc += duration
        boundaries.append((acc, power, jitter))
    samples = []
    for i in range(n):
        t = i * spec.sample_interval
        for end, power, jitter in boundaries:
            if t < end:
                break
        p = power if jitter == 0 else power + jitter * rng.standard_normal()
        samples.append(PowerSample(t=t, p=max(p, 0.0)))
    return PowerTrace(tuple(samples), spec.sample_interval, source_id=source_id)


def replay_trace(path: str | Path, sample_interval: float | None = None) -> PowerTrace:
    """Load a trace CSV (header ``t_s,power_w``).

    The sample interval is inferred as the median inter-sample gap unless
    given explicitly; the median tolerates one-off meter hiccups better than
    the mean.

    Raises:
        ParseError: malformed header or row (carries the line number).
        NonMonotoneTimestamps: timestamps out of order.
    """
    path = Path(path)
    samples: list[PowerSample] = []
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        for lineno, row in enumerate(reader, start=1):
            if lineno == 1:
                if [c.strip() for c in row] != list(TRACE_HEADER):
                    raise ParseError(
                        f"expected header {','.join(TRACE_HEADER)!r}, got {row!r}", lineno
                    )
                continue
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 2:
                raise ParseError(f"expected 2 fields, got {len(row)}", lineno)
            try:
                t, p = float(row[0]), float(row[1])
            except ValueError as exc:
                raise ParseError(f"non-numeric field in {row!r}", lineno) from exc
            try:
                samples.append(PowerSample(t=t, p=p))
            except ValueError as exc:
                raise ParseError(str(exc), lineno) from exc
    for a, b in zip(samples, samples[1:]):
        if not (b.t > a.t):
            raise NonMonotoneTimestamps(
                f"{path}: timestamps must be strictly increasing, got {a.t} then {b.t}"
            )
    if len(samples) < 2 and sample_interval is None:
        raise ParseError(
            f"need at least 2 samples to infer the interval, got {len(samples)}"
        )
    if sample_interval is None:
        gaps = [b.t - a.t for a, b in zip(samples, samples[1:])]
        sample_interval = statistics.median(gaps)
    return PowerTrace(tuple(samples), sample_interval, source_id=str(path))


def read_windows(path: str | Path) -> list[MeasurementWindow]:
    """Load a windows CSV (header ``t_start,t_end``)."""
    windows: list[MeasurementWindow] = []
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        for lineno, row in enumerate(reader, start=1):
            if lineno == 1:
                if [c.strip() for c in row] != list(WINDOW_HEADER):
                    raise ParseError(
                        f"expected header {','.join(WINDOW_HEADER)!r}, got {row!r}", lineno
                    )
                continue
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 2:
                raise ParseError(f"expected 2 fields, got {len(row)}", lineno)
            try:
                windows.append(MeasurementWindow(float(row[0]), float(row[1])))
            except ValueError as exc:
                raise ParseError(str(exc), lineno) from exc
    if not windows:
        raise ParseError("windows file contains no windows")
    return windows


@dataclass
class _Collector:
    """Polling loop state shared with the acquisition thread."""

    source: PowerSource
    clock: Clock
    stop: threading.Event
    deadline: float | None = None
    samples: list[PowerSample] = field(default_factory=list)
    error: Exception | None = None

    def run(self) -> None:
        self.clock.register()
        try:
            interval = self.source.interval()
            epoch = self.clock.now()
            polls = 0
            while not self.stop.is_set():
                if self.deadline is not None and self.clock.now() >= self.deadline:
                    break
                self.samples.append(self.source.poll())
                polls += 1
                # schedule against absolute targets so the grid does not drift
                self.clock.sleep(epoch + polls * interval - self.clock.now())
        except Exception as exc:  # surfaced by the owner as SourceFailure
            self.error = exc
        finally:
            self.clock.unregister()


def collect_samples(
    source: PowerSource,
    clock: Clock,
    stop: threading.Event,
    duration: float | None = None,
) -> _Collector:
    """Start a polling thread; caller must call :func:`finish_collection`."""
    deadline = None if duration is None else clock.now() + duration
    collector = _Collector(source=source, clock=clock, stop=stop, deadline=deadline)
    thread = threading.Thread(target=collector.run, name="gpuwatt-poll", daemon=True)
    collector.thread = thread  # type: ignore[attr-defined]
    thread.start()
    return collector


def finish_collection(collector: _Collector) -> list[PowerSample]:
    """Stop the polling thread and return its samples (absolute timestamps)."""
    collector.stop.set()
    collector.thread.join()  # type: ignore[attr-defined]
    if collector.error is not None:
        raise SourceFailure("power source failed during acquisition") from collector.error
    return collector.samples


def rebase_samples(
    samples: Sequence[PowerSample], interval: float, source_id: str = ""
) -> PowerTrace:
    """Shift absolute sample timestamps so the trace starts at t = 0."""
    if not samples:
        raise SourceFailure("acquisition produced no samples")
    epoch = samples[0].t
    rebased = tuple(PowerSample(t=s.t - epoch, p=s.p) for s in samples)
    return PowerTrace(rebased, interval, source_id=source_id)


def acquire(source: PowerSource, duration: float, clock: Clock | None = None) -> PowerTrace:
    """Poll ``source`` at its native interval for ``duration`` seconds.

    The polling loop runs on a dedicated thread so a caller can drive a
    workload concurrently. On any poll failure the partial trace is
    discarded and :class:`SourceFailure` is raised.
    """
    if duration <= 0:
        raise ValueError(f"duration must be > 0, got {duration}")
    clock = clock or SystemClock()
    clock.register()
    try:
        stop = threading.Event()
        collector = collect_samples(source, clock, stop, duration=duration)
        clock.sleep(duration)
    finally:
        clock.unregister()
    samples = finish_collection(collector)
    return rebase_samples(samples, source.interval(), source_id=type(source).__name__)
