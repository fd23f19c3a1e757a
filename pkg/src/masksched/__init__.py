"""Decoding schedulers and a benchmark harness for masked-token denoisers."""

from .denoise import (
    ConfidenceField,
    DenoiserSession,
    OracleParams,
    OracleSession,
    UniformSession,
    open_external,
)
from .errors import (
    DomainError,
    EmptyQueryError,
    HandshakeTimeoutError,
    InsufficientTraceError,
    InvariantViolation,
    MaskschedError,
    PositionRangeError,
    ProtocolError,
    SpawnError,
    UndefinedMetricError,
    VersionMismatchError,
)
from .harness import ExperimentSpec, SegmentTask, gen_task, make_session, run_experiment
from .metrics import (
    RunMetric,
    accounting,
    annotate_mhco,
    exact_match,
    mhco_per_step,
    mhco_run,
    mhco_step,
    verify_trace,
)
from .sched import (
    RunTrace,
    ScheduleConfig,
    StepDecision,
    StepRecord,
    init_wavefront,
    run_decode,
    select_block,
    select_standard,
    step_budget,
    wavefront_step,
)
from .seqcore import (
    INFINITY,
    MASK,
    DecodeState,
    GenSequence,
    corrupt,
    dist,
    finalize,
    new_state,
)
from .traceio import (
    decision_fingerprint,
    read_trace,
    trace_from_lines,
    trace_to_bytes,
    trace_to_lines,
    write_trace,
)

__version__ = "0.1.0"
