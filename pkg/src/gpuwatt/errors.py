"""Exception and warning types shared across the toolkit."""


class GpuwattError(Exception):
    """Base class for all toolkit errors."""


class EmptyWindow(GpuwattError):
    """A measurement window contains no trace samples (window/trace mismatch)."""


class MismatchedInterval(GpuwattError):
    """Traces aggregated together declare different sample intervals."""


class NonMonotoneTimestamps(GpuwattError):
    """Sample timestamps are not strictly increasing."""


class ParseError(GpuwattError):
    """A data file is malformed; carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class SourceFailure(GpuwattError):
    """A power source failed while being polled."""


class WorkloadFailure(GpuwattError):
    """A workload failed twice within one measurement iteration."""


class DegenerateInput(GpuwattError):
    """A fit was requested on data without two distinct regressor values."""


class ZeroMeasured(GpuwattError):
    """A relative error was requested against a zero measured value."""


class TooFewPoints(GpuwattError):
    """Cross-validation was requested with fewer points than folds."""


class ZeroVariance(GpuwattError):
    """A correlation was requested on a constant sequence."""


class InconsistentGrid(GpuwattError):
    """Layer grid scales of a network description do not chain."""


class SchemaError(GpuwattError):
    """A network description file violates the documented schema."""


class JoinMismatch(GpuwattError):
    """Fit results and MAC tables could not be joined on (network, quality_class)."""

    def __init__(self, message: str, unmatched: list[str] | None = None):
        self.unmatched = unmatched or []
        super().__init__(message)


class PreheatTimeout(UserWarning):
    """Preheat did not reach the target temperature; the campaign continues."""


class NegativeEnergyWarning(UserWarning):
    """Idle subtraction produced a negative net energy; likely an acquisition fault."""
