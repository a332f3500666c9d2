"""Monotonic clock abstraction so acquisition loops can run on virtual time.

Real campaigns use :class:`SystemClock`. Tests and simulations use
:class:`VirtualClock`, which advances time only when every participating
thread is asleep, making multi-threaded measurement runs fully deterministic.
"""
from __future__ import annotations

import threading
import time
from typing import Protocol, runtime_checkable


@runtime_checkable
class Clock(Protocol):
    def now(self) -> float: ...

    def sleep(self, dt: float) -> None: ...

    def register(self) -> None: ...

    def unregister(self) -> None: ...


class SystemClock:
    """Wall-clock time via ``time.monotonic``; registration is a no-op."""

    def now(self) -> float:
        return time.monotonic()

    def sleep(self, dt: float) -> None:
        if dt > 0:
            time.sleep(dt)

    def register(self) -> None:
        pass

    def unregister(self) -> None:
        pass


class VirtualClock:
    """Deterministic shared clock for cooperating threads.

    Every thread that will call :meth:`sleep` must register itself
    (re-registration is a no-op). Time jumps to the earliest pending wake-up
    as soon as all registered threads are simultaneously asleep; threads due
    at the same virtual instant observe identical ``now()`` values, so
    schedules do not depend on OS interleaving.
    """

    def __init__(self, start: float = 0.0, stall_timeout: float = 10.0):
        self._now = float(start)
        self._cond = threading.Condition()
        self._sleeping: list[list] = []  # [wake_time, seq] entries
        self._participants: set[int] = set()
        self._seq = 0
        # real-time guard against participants blocking outside sleep()
        self._stall_timeout = stall_timeout

    def now(self) -> float:
        with self._cond:
            return self._now

    def register(self) -> None:
        with self._cond:
            self._participants.add(threading.get_ident())

    def unregister(self) -> None:
        with self._cond:
            self._participants.discard(threading.get_ident())
            self._advance_if_all_asleep()
            self._cond.notify_all()

    def sleep(self, dt: float) -> None:
        if dt <= 0:
            return
        with self._cond:
            if threading.get_ident() not in self._participants:
                raise RuntimeError("thread must register() with the virtual clock first")
            entry = [self._now + dt, self._seq]
            self._seq += 1
            self._sleeping.append(entry)
            self._advance_if_all_asleep()
            while entry in self._sleeping:
                if not self._cond.wait(timeout=self._stall_timeout):
                    self._sleeping.remove(entry)
                    raise RuntimeError(
                        "virtual clock stalled: a participating thread is "
                        "blocked outside clock.sleep()"
                    )

    def _advance_if_all_asleep(self) -> None:
        if self._participants and len(self._sleeping) >= len(self._participants):
            wake = min(e[0] for e in self._sleeping)
            self._now = max(self._now, wake)
            for entry in [e for e in self._sleeping if e[0] <= self._now]:
                self._sleeping.remove(entry)
            self._cond.notify_all()
