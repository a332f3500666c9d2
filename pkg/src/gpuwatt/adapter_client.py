"""Client for the workload adapter's line protocol over stdio.

The adapter is a subprocess that loads one compression modality up front and
then serves commands one at a time:

===========  =========================================================
primary      adapter
===========  =========================================================
(launch)     ``READY`` once the model is loaded
``RUN``      ``META <padded_w> <padded_h> <checksum>`` for the executed
             image, then ``DONE <elapsed_s>``; or ``ERR <message>``
``TEMP?``    ``TEMP <celsius>`` or ``TEMP NA``
``QUIT``     exits with status 0
(other)      ``ERR <message>``, keeps serving
===========  =========================================================

``DONE`` elapsed times cover the encode+decode execution only, not model
loading or protocol latency. The client implements the measurement
protocol's workload contract, so an adapter plugs straight into a campaign.
"""
from __future__ import annotations

import shlex
import subprocess
from pathlib import Path

from .errors import GpuwattError


class AdapterError(GpuwattError):
    """The adapter reported ERR or spoke outside the protocol grammar."""


class AdapterClient:
    """Drive one adapter subprocess; one command in flight at a time."""

    def __init__(self, command: list[str] | str, cwd: str | Path | None = None):
        if isinstance(command, str):
            command = shlex.split(command)
        self._proc = subprocess.Popen(
            command,
            cwd=cwd,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            bufsize=1,
        )
        self.padded_size: tuple[int, int] | None = None
        self.checksum: str | None = None
        line = self._read_line()
        if line != "READY":
            self._proc.kill()
            raise AdapterError(f"expected READY handshake, got {line!r}")

    def _read_line(self) -> str:
        assert self._proc.stdout is not None
        line = self._proc.stdout.readline()
        if line == "":
            raise AdapterError(
                f"adapter closed its stream (exit code {self._proc.poll()})"
            )
        return line.strip()

    def _send(self, command: str) -> None:
        assert self._proc.stdin is not None
        try:
            self._proc.stdin.write(command + "\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise AdapterError(f"adapter pipe closed while sending {command!r}") from exc

    def run_once(self) -> float:
        """Execute one encode+decode; returns the adapter-reported seconds."""
        self._send("RUN")
        while True:
            line = self._read_line()
            if line.startswith("META "):
                parts = line.split()
                if len(parts) != 4:
                    raise AdapterError(f"malformed META line: {line!r}")
                self.padded_size = (int(parts[1]), int(parts[2]))
                self.checksum = parts[3]
                continue
            if line.startswith("DONE "):
                elapsed = float(line.split(maxsplit=1)[1])
                if not (elapsed > 0):
                    raise AdapterError(f"non-positive elapsed time: {line!r}")
                return elapsed
            if line.startswith("ERR"):
                raise AdapterError(line[3:].strip() or "adapter reported an error")
            raise AdapterError(f"unexpected line during RUN: {line!r}")

    def temperature(self) -> float | None:
        """Device temperature in Celsius, or None when unavailable."""
        self._send("TEMP?")
        line = self._read_line()
        if not line.startswith("TEMP "):
            raise AdapterError(f"expected TEMP response, got {line!r}")
        value = line.split(maxsplit=1)[1].strip()
        if value == "NA":
            return None
        return float(value)

    def pixels(self) -> int | None:
        """Padded pixel count of the last executed image, if known."""
        if self.padded_size is None:
            return None
        return self.padded_size[0] * self.padded_size[1]

    def close(self) -> int:
        """Send QUIT and wait; returns the adapter's exit code."""
        if self._proc.poll() is None:
            try:
                self._send("QUIT")
            except AdapterError:
                pass
        try:
            return self._proc.wait(timeout=30)
        except subprocess.TimeoutExpired:
            self._proc.kill()
            return self._proc.wait()

    def __enter__(self) -> "AdapterClient":
        return self

    def __exit__(self, *exc) -> None:
        self.close()
