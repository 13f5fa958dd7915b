"""Input coercion for the estimator layer."""

from __future__ import annotations

import numpy as np

from .calibration import LocatedOperations
from .exceptions import InvalidArgumentError
from .traces import DEFAULT_PRECISION, Trace, as_samples


def check_stream(X, precision: int = DEFAULT_PRECISION) -> np.ndarray:
    """Return ``X`` as a 1-D int16 sample array.

    Accepts a :class:`Trace`, a 1-D sequence, or a 2-D array with a single
    row or column (the usual ``(n_samples, 1)`` estimator layout).
    """
    if isinstance(X, Trace):
        return X.samples
    arr = np.asarray(X)
    if arr.ndim == 2 and 1 in arr.shape:
        arr = arr.ravel()
    if arr.ndim != 1:
        raise InvalidArgumentError(f"expected a single stream, got array of shape {arr.shape}")
    return as_samples(arr, precision)


def check_locations(y, n_samples: int, span: int | None = None) -> LocatedOperations:
    """Coerce ``y`` (start indices or :class:`LocatedOperations`) and bounds-check it."""
    if isinstance(y, LocatedOperations):
        ops = y
    else:
        if y is None:
            raise InvalidArgumentError("operation start indices are required")
        locs = np.unique(np.asarray(y, dtype=np.int64))
        if span is None:
            raise InvalidArgumentError("span is required when locations are given as indices")
        ops = LocatedOperations(tuple(locs.tolist()), int(span))
    if len(ops) == 0:
        raise InvalidArgumentError("at least one operation location is required")
    if ops.locations[0] < 0 or ops.locations[-1] + ops.span > n_samples:
        raise InvalidArgumentError("an operation window extends past the stream")
    return ops


def default_offsets(template_samples: np.ndarray, steps: int = 64) -> list[int]:
    """Offsets from 0 to half the template's peak-to-peak range."""
    half = int(np.ptp(template_samples)) // 2
    return sorted({int(v) for v in np.linspace(0, max(half, 1), steps + 1).round()})
