"""GPU energy profiling and pixel-count energy modeling for neural image codecs."""

from ._clock import SystemClock, VirtualClock
from .errors import (
    DegenerateInput,
    EmptyWindow,
    GpuwattError,
    InconsistentGrid,
    JoinMismatch,
    MismatchedInterval,
    NegativeEnergyWarning,
    NonMonotoneTimestamps,
    ParseError,
    PreheatTimeout,
    SchemaError,
    SourceFailure,
    TooFewPoints,
    WorkloadFailure,
    ZeroMeasured,
    ZeroVariance,
)
from .modeling import (
    DataPoint,
    FitReport,
    LinearModel,
    PixelEnergyModel,
    fit_linear,
    kfold_cv,
    mre,
    pearson,
    predict,
    slope_vs_mac,
)
from .network import (
    LayerSpec,
    MacReport,
    NetworkDescription,
    ParamBlock,
    Subnet,
    layer_macs_per_pixel,
    load_description,
    load_fixture,
    fixture_names,
    macs_per_pixel,
    pad_dimensions,
    param_count,
)
from .protocol import (
    MeasurementPlan,
    StoppingDecision,
    WorkloadHandle,
    choose_m,
    ci_stop_check,
    preheat,
    run_idle_reference,
    run_measurement,
    run_until_stable,
)
from .sources import (
    CommandPowerSource,
    PowerSource,
    ScriptedPowerSource,
    SimulatedPowerSource,
    SyntheticTraceSpec,
    acquire,
    replay_trace,
    synthesize_trace,
)
from .trace import (
    EnergyEstimate,
    EnergyRecord,
    MeasurementWindow,
    PowerSample,
    PowerTrace,
    compute_mean_energy,
    idle_energy,
    integrate_energy,
)

__version__ = "0.1.0"
