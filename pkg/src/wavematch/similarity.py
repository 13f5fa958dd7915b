"""Pearson correlation, sum of absolute differences and interval matching.

These are the reference (software-side) measures. Only interval matching runs
in the streaming engine; Pearson and SAD serve calibration and localisation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .exceptions import InvalidArgumentError, UndefinedCorrelationError
from .traces import IntervalTemplate, Template, Trace


@dataclass(frozen=True)
class SimilarityScore:
    kind: Literal["pearson", "sad", "interval"]
    value: float | int


def _values(x) -> np.ndarray:
    if isinstance(x, (Trace, Template)):
        return x.samples
    arr = np.asarray(x)
    if arr.ndim != 1:
        raise InvalidArgumentError(f"expected a 1-D sequence, got shape {arr.shape}")
    return arr


def _paired(t, c) -> tuple[np.ndarray, np.ndarray]:
    t, c = _values(t), _values(c)
    if t.size != c.size:
        raise InvalidArgumentError(f"length mismatch: segment has {t.size} samples, template {c.size}")
    return t, c


def pearson_correlation(t, c) -> float:
    """Pearson correlation coefficient of two equally long sequences.

    Two-pass evaluation in float64; the result is clipped to [-1, 1].
    """
    t, c = _paired(t, c)
    if t.size < 2:
        raise InvalidArgumentError("Pearson correlation needs at least two samples")
    tf = t.astype(np.float64)
    cf = c.astype(np.float64)
    dt = tf - tf.mean()
    dc = cf - cf.mean()
    st = float(np.dot(dt, dt))
    sc = float(np.dot(dc, dc))
    if st == 0.0 or sc == 0.0:
        raise UndefinedCorrelationError("correlation is undefined for a constant input")
    r = float(np.dot(dt, dc)) / (np.sqrt(st) * np.sqrt(sc))
    return min(1.0, max(-1.0, r))


def sad(t, c) -> int:
    """Sum of absolute differences, accumulated in int64 (no overflow for any p <= 16)."""
    t, c = _paired(t, c)
    return int(np.abs(t.astype(np.int64) - c.astype(np.int64)).sum())


def interval_indicator(sample: int, upper: int, lower: int) -> int:
    """1 if ``lower <= sample <= upper`` (both bounds inclusive), else 0."""
    return int(lower <= sample <= upper)


def interval_score(t, it: IntervalTemplate) -> int:
    """Count compared positions whose stream sample lies inside the corridor.

    ``t`` is the window starting at the candidate position; position ``i`` of
    the template is compared with ``t[i * it.source_stride]``.
    """
    t = _values(t)
    if t.size < it.span:
        raise InvalidArgumentError(
            f"segment of {t.size} samples is shorter than the template span {it.span}"
        )
    x = t[: it.span : it.source_stride]
    return int(np.count_nonzero((x >= it.lower) & (x <= it.upper)))


def score(kind: str, t, reference) -> SimilarityScore:
    """Dispatch helper returning a tagged :class:`SimilarityScore`."""
    if kind == "pearson":
        return SimilarityScore("pearson", pearson_correlation(t, reference))
    if kind == "sad":
        return SimilarityScore("sad", sad(t, reference))
    if kind == "interval":
        return SimilarityScore("interval", interval_score(t, reference))
    raise InvalidArgumentError(f"unknown similarity kind {kind!r}")
