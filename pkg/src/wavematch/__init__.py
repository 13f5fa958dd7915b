"""Streaming interval-matching trigger: simulator, calibration and tooling."""

__version__ = "0.1.0"

from .calibration import (
    CalibrationReport,
    LocatedOperations,
    build_template,
    calibrate,
    locate_operations,
    subsample_template,
)
from .engine import (
    EngineConfig,
    EngineRun,
    MatchEvent,
    MatchingEngine,
    batch_events,
    batch_match,
    compute_excess_samples,
    compute_srg_length,
    run_engine,
    scalar_reference_match,
)
from .estimator import IntervalMatcher, OperationLocator
from .exceptions import (
    BadMagicError,
    CalibrationFailedError,
    InvalidArgumentError,
    NotInitializedError,
    ResourceBudgetError,
    SampleRangeError,
    TraceFormatError,
    TruncatedPayloadError,
    UndefinedCorrelationError,
    UnsupportedVersionError,
    WavematchError,
)
from .io import load_template, load_trace, read_event_log, save_template, save_trace, write_event_log
from .resources import KU85, DeviceProfile, ResourceEstimate, estimate_luts, max_template_length
from .similarity import SimilarityScore, interval_indicator, interval_score, pearson_correlation, sad, score
from .synth import Embedding, GroundTruth, NoiseSpec, SynthSpec, generate, repeated_operation_scenario
from .traces import IntervalTemplate, Template, Trace, make_interval_template

__all__ = [name for name in dir() if not name.startswith("_")]
