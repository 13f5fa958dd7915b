"""scikit-learn compatible front end.

``OperationLocator`` learns a seed segment and predicts operation starts in
a recording; ``IntervalMatcher`` learns an interval template from a
recording plus operation starts and predicts trigger events on new streams.
Both expose ``get_params``/``set_params`` through :class:`BaseEstimator`, so
they can be cloned and grid-searched.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .calibration import (
    DEFAULT_BACKGROUND_STEP,
    DEFAULT_LOCATOR_THRESHOLD,
    DEFAULT_REJECT_FLOOR,
    build_template,
    calibrate,
    locate_operations,
    subsample_template,
)
from .engine import EngineConfig, batch_events, batch_match, run_engine
from .exceptions import InvalidArgumentError
from .traces import DEFAULT_PRECISION
from .validation import check_locations, check_stream, default_offsets
from . import _kernels


class OperationLocator(BaseEstimator):
    """Correlation-based locator of repeated operations."""

    def __init__(self, threshold=DEFAULT_LOCATOR_THRESHOLD, coarse_step=4,
                 reject_floor=DEFAULT_REJECT_FLOOR, expected_count=None,
                 precision=DEFAULT_PRECISION):
        self.threshold = threshold
        self.coarse_step = coarse_step
        self.reject_floor = reject_floor
        self.expected_count = expected_count
        self.precision = precision

    def fit(self, X, y=None):
        """Store ``X`` as the seed segment."""
        self.seed_ = check_stream(X, self.precision)
        if self.seed_.size < 2:
            raise InvalidArgumentError("seed segment needs at least two samples")
        return self

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "seed_")
        x = check_stream(X, self.precision)
        self.located_ = locate_operations(
            x, self.seed_, self.expected_count,
            threshold=self.threshold, coarse_step=self.coarse_step, reject_floor=self.reject_floor,
        )
        return np.asarray(self.located_.locations, dtype=np.int64)


class IntervalMatcher(BaseEstimator):
    """Calibrated interval-matching trigger.

    ``fit(recording, locations)`` averages the located windows into a
    template, subsamples it by ``stride`` and sweeps ``offsets`` for the best
    separation. ``predict`` returns the start indices of accepted trigger
    events (after hold-off), computed by the compiled batch matcher or, with
    ``mode="engine"``, by the cycle-accurate simulator.
    """

    def __init__(self, template_length=None, stride=1, offsets=None,
                 background_step=DEFAULT_BACKGROUND_STEP, positional_buffer=0,
                 parallelism=32, latency=4, holdoff_samples=None,
                 trigger_duration_samples=None, mode="batch", precision=DEFAULT_PRECISION):
        self.template_length = template_length
        self.stride = stride
        self.offsets = offsets
        self.background_step = background_step
        self.positional_buffer = positional_buffer
        self.parallelism = parallelism
        self.latency = latency
        self.holdoff_samples = holdoff_samples
        self.trigger_duration_samples = trigger_duration_samples
        self.mode = mode
        self.precision = precision

    def _config(self) -> EngineConfig:
        return EngineConfig(
            parallelism=self.parallelism,
            precision=self.precision,
            latency=self.latency,
            positional_buffer=self.positional_buffer,
            holdoff_samples=self.holdoff_samples,
            trigger_duration_samples=self.trigger_duration_samples,
        )

    def fit(self, X, y):
        x = check_stream(X, self.precision)
        ops = check_locations(y, x.size, self.template_length)
        length = self.template_length or ops.span
        if length != ops.span:
            ops = check_locations(ops.locations, x.size, length)
        template = build_template(x, ops, length, positional_buffer=self.positional_buffer,
                                  precision=self.precision)
        self.template_ = subsample_template(template, self.stride)
        offsets = self.offsets if self.offsets is not None else default_offsets(template.samples)
        self.interval_template_, self.report_ = calibrate(
            x, ops, self.template_, offsets, background_step=self.background_step
        )
        return self

    def decision_function(self, X) -> np.ndarray:
        """Interval score of every window start in ``X``."""
        check_is_fitted(self, "interval_template_")
        it = self.interval_template_
        return _kernels.all_interval_scores(check_stream(X, self.precision), it.lower, it.upper,
                                            it.source_stride)

    def detect(self, X):
        """Trigger events (:class:`~wavematch.engine.MatchEvent`) found in ``X``."""
        check_is_fitted(self, "interval_template_")
        x = check_stream(X, self.precision)
        if self.mode == "engine":
            return run_engine(x, self.interval_template_, self._config()).events
        if self.mode == "batch":
            return batch_events(x, self.interval_template_, self._config())
        raise InvalidArgumentError(f"mode must be 'batch' or 'engine', got {self.mode!r}")

    def predict(self, X) -> np.ndarray:
        return np.asarray([e.start_index for e in self.detect(X)], dtype=np.int64)

    def candidates(self, X) -> np.ndarray:
        """All window starts at or above threshold, before hold-off."""
        check_is_fitted(self, "interval_template_")
        return batch_match(check_stream(X, self.precision), self.interval_template_).starts

    def score(self, X, y) -> float:
        """F1 of exact-index detections against the true starts ``y``."""
        found = set(self.predict(X).tolist())
        truth = set(np.asarray(y, dtype=np.int64).tolist())
        if not found and not truth:
            return 1.0
        hits = len(found & truth)
        return 2.0 * hits / (len(found) + len(truth))
