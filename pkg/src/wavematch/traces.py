"""Value types for samples, traces and templates.

Samples are held in ``int16`` containers whatever the configured precision
``p`` (``p <= 16``); the precision is enforced by range checks on ingestion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import InvalidArgumentError, SampleRangeError

DEFAULT_PRECISION = 14
SAMPLE_DTYPE = np.int16


def sample_range(precision: int = DEFAULT_PRECISION) -> tuple[int, int]:
    """Return the inclusive ``(lo, hi)`` range of a signed ``precision``-bit sample."""
    if not 1 < precision <= 16:
        raise InvalidArgumentError(f"precision must be in [2, 16], got {precision}")
    half = 1 << (precision - 1)
    return -half, half - 1


def as_samples(values, precision: int = DEFAULT_PRECISION) -> np.ndarray:
    """Convert ``values`` to a read-only ``int16`` array, checking the range."""
    arr = np.asarray(values)
    if arr.ndim != 1:
        raise InvalidArgumentError(f"samples must be one-dimensional, got shape {arr.shape}")
    if arr.size and arr.dtype.kind not in "iub":
        if arr.dtype.kind == "f" and np.all(np.isfinite(arr)) and np.all(arr == np.round(arr)):
            arr = arr.astype(np.int64)
        else:
            raise InvalidArgumentError(f"samples must be integers, got dtype {arr.dtype}")
    lo, hi = sample_range(precision)
    if arr.size:
        amin, amax = int(arr.min()), int(arr.max())
        if amin < lo or amax > hi:
            bad = amin if amin < lo else amax
            raise SampleRangeError(
                f"sample {bad} outside [{lo}, {hi}] for precision p={precision}"
            )
    out = np.array(arr, dtype=SAMPLE_DTYPE, copy=True)
    out.flags.writeable = False
    return out


def clamp_samples(values, precision: int = DEFAULT_PRECISION) -> np.ndarray:
    """Saturate integer ``values`` into the sample range (hardware register behaviour)."""
    lo, hi = sample_range(precision)
    return np.clip(np.asarray(values, dtype=np.int64), lo, hi)


@dataclass(frozen=True, eq=False)
class Trace:
    """A finite stream of signed ADC codes."""

    samples: np.ndarray
    sample_rate_hz: float = 10e9
    label: str = ""
    precision: int = DEFAULT_PRECISION

    def __post_init__(self):
        object.__setattr__(self, "samples", as_samples(self.samples, self.precision))
        if not self.sample_rate_hz > 0:
            raise InvalidArgumentError(f"sample_rate_hz must be positive, got {self.sample_rate_hz}")

    def __len__(self) -> int:
        return int(self.samples.size)

    def __eq__(self, other):
        if not isinstance(other, Trace):
            return NotImplemented
        return (
            self.sample_rate_hz == other.sample_rate_hz
            and self.label == other.label
            and self.precision == other.precision
            and np.array_equal(self.samples, other.samples)
        )

    def segment(self, start: int, length: int) -> np.ndarray:
        if start < 0 or start + length > len(self):
            raise InvalidArgumentError(
                f"segment [{start}, {start + length}) outside trace of length {len(self)}"
            )
        return self.samples[start:start + length]


@dataclass(frozen=True, eq=False)
class Template:
    """Reference waveform ``c`` of length ``n``.

    ``stride`` selects which samples take part in comparisons (indices
    ``0, stride, 2*stride, ...``); ``positional_buffer`` is the number of
    samples of the operation that precede the template.
    """

    samples: np.ndarray
    stride: int = 1
    positional_buffer: int = 0
    precision: int = DEFAULT_PRECISION

    def __post_init__(self):
        object.__setattr__(self, "samples", as_samples(self.samples, self.precision))
        if self.samples.size < 1:
            raise InvalidArgumentError("template must hold at least one sample")
        if int(self.stride) < 1:
            raise InvalidArgumentError(f"stride must be >= 1, got {self.stride}")
        if int(self.positional_buffer) < 0:
            raise InvalidArgumentError("positional_buffer must be >= 0")
        object.__setattr__(self, "stride", int(self.stride))
        object.__setattr__(self, "positional_buffer", int(self.positional_buffer))

    def __len__(self) -> int:
        return int(self.samples.size)

    def __eq__(self, other):
        if not isinstance(other, Template):
            return NotImplemented
        return (
            self.stride == other.stride
            and self.positional_buffer == other.positional_buffer
            and self.precision == other.precision
            and np.array_equal(self.samples, other.samples)
        )

    @property
    def n(self) -> int:
        return len(self)

    @property
    def compared_positions(self) -> int:
        return math.ceil(self.n / self.stride)

    @property
    def compared_samples(self) -> np.ndarray:
        return self.samples[::self.stride]


@dataclass(frozen=True, eq=False)
class IntervalTemplate:
    """Precomputed per-position corridor ``[lower[i], upper[i]]`` plus match threshold.

    Position ``i`` is compared against stream sample ``start + i * source_stride``.
    """

    upper: np.ndarray
    lower: np.ndarray
    threshold: int
    source_stride: int = 1
    precision: int = DEFAULT_PRECISION
    offset: int | None = field(default=None)

    def __post_init__(self):
        upper = as_samples(self.upper, self.precision)
        lower = as_samples(self.lower, self.precision)
        if upper.size < 1 or upper.size != lower.size:
            raise InvalidArgumentError(
                f"upper/lower must be non-empty and equally long, got {upper.size} and {lower.size}"
            )
        if np.any(upper < lower):
            i = int(np.argmax(upper < lower))
            raise InvalidArgumentError(f"upper[{i}]={upper[i]} < lower[{i}]={lower[i]}")
        threshold = int(self.threshold)
        if not 0 <= threshold <= upper.size:
            raise InvalidArgumentError(f"threshold must lie in [0, {upper.size}], got {threshold}")
        if int(self.source_stride) < 1:
            raise InvalidArgumentError("source_stride must be >= 1")
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "threshold", threshold)
        object.__setattr__(self, "source_stride", int(self.source_stride))

    def __eq__(self, other):
        if not isinstance(other, IntervalTemplate):
            return NotImplemented
        return (
            self.threshold == other.threshold
            and self.source_stride == other.source_stride
            and self.precision == other.precision
            and self.offset == other.offset
            and np.array_equal(self.upper, other.upper)
            and np.array_equal(self.lower, other.lower)
        )

    @property
    def m(self) -> int:
        return int(self.upper.size)

    @property
    def span(self) -> int:
        """Stream samples covered by one window: ``(m - 1) * stride + 1``."""
        return (self.m - 1) * self.source_stride + 1

    def with_threshold(self, threshold: int) -> IntervalTemplate:
        return IntervalTemplate(
            self.upper, self.lower, threshold, self.source_stride, self.precision, self.offset
        )


def make_interval_template(template: Template, offset: int) -> IntervalTemplate:
    """Precompute saturated corridor bounds ``c_i +/- offset`` for every compared position.

    The threshold starts at ``m`` (every position must match); calibration
    lowers it afterwards.
    """
    if not isinstance(template, Template) or template.n < 1:
        raise InvalidArgumentError("a non-empty Template is required")
    offset = int(offset)
    if offset < 0:
        raise InvalidArgumentError(f"offset must be >= 0, got {offset}")
    c = template.compared_samples.astype(np.int64)
    upper = clamp_samples(c + offset, template.precision)
    lower = clamp_samples(c - offset, template.precision)
    return IntervalTemplate(
        upper=upper,
        lower=lower,
        threshold=upper.size,
        source_stride=template.stride,
        precision=template.precision,
        offset=offset,
    )
