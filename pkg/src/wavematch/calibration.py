"""Template construction and interval-matching calibration from a recording.

Workflow: :func:`locate_operations` finds the operations with a sliding
Pearson correlation against a seed segment, :func:`build_template` averages
them, :func:`subsample_template` thins the comparisons, and
:func:`calibrate` sweeps the corridor offset to maximise the gap between the
weakest true window and the strongest background window.
"""

from __future__ import annotations

import bisect
import logging
import math
from dataclasses import dataclass, replace
from typing import Iterable

import numpy as np

from . import _kernels
from .exceptions import CalibrationFailedError, InvalidArgumentError, UndefinedCorrelationError
from .traces import IntervalTemplate, Template, Trace, make_interval_template

log = logging.getLogger(__name__)

DEFAULT_LOCATOR_THRESHOLD = 0.8
DEFAULT_REJECT_FLOOR = 0.25
DEFAULT_BACKGROUND_STEP = 17


@dataclass(frozen=True)
class LocatedOperations:
    locations: tuple[int, ...]
    span: int
    rejected: tuple[tuple[int, str], ...] = ()
    correlations: tuple[float, ...] = ()

    def __post_init__(self):
        locs = tuple(int(v) for v in self.locations)
        if any(b - a < self.span for a, b in zip(locs, locs[1:])):
            raise InvalidArgumentError("locations must be increasing and at least one span apart")
        object.__setattr__(self, "locations", locs)
        object.__setattr__(self, "rejected", tuple((int(i), str(r)) for i, r in self.rejected))

    def __len__(self) -> int:
        return len(self.locations)


@dataclass(frozen=True)
class CalibrationReport:
    chosen_offset: int
    chosen_threshold: int
    true_score_min: int
    background_score_max: int
    margin: int
    compared_positions: int = 0
    true_windows: int = 0
    background_windows: int = 0

    @property
    def succeeded(self) -> bool:
        return self.margin > 0 and self.background_score_max < self.chosen_threshold <= self.true_score_min


def _samples(x) -> np.ndarray:
    return x.samples if isinstance(x, (Trace, Template)) else np.asarray(x)


def sliding_pearson(x, seed, starts) -> np.ndarray:
    """Pearson correlation of ``seed`` with the windows of ``x`` at ``starts``.

    Zero-variance windows yield 0; a constant seed raises.
    """
    x = _samples(x)
    seed = _samples(seed)
    n = seed.size
    c = seed.astype(np.float64)
    c -= c.mean()
    c_norm = math.sqrt(float(np.dot(c, c)))
    if c_norm == 0.0:
        raise UndefinedCorrelationError("seed segment is constant")
    starts = np.ascontiguousarray(starts, dtype=np.int64)
    xi = x.astype(np.int64)
    s1 = np.concatenate(([0], np.cumsum(xi)))
    s2 = np.concatenate(([0], np.cumsum(xi * xi)))
    sum1 = s1[starts + n] - s1[starts]
    sum2 = s2[starts + n] - s2[starts]
    # n * sum of squared deviations, exact in int64
    var_n = n * sum2 - sum1 * sum1
    num = np.empty(starts.size, dtype=np.float64)
    _kernels.dots_at(x.astype(np.float64), c, starts, num)
    denom = np.sqrt(var_n.astype(np.float64) / n) * c_norm
    out = np.zeros(starts.size, dtype=np.float64)
    ok = var_n > 0
    out[ok] = num[ok] / denom[ok]
    return np.clip(out, -1.0, 1.0)


def _non_max_suppression(pos: np.ndarray, corr: np.ndarray, width: int) -> list[tuple[int, float]]:
    order = np.lexsort((pos, -corr))
    kept: list[int] = []
    result = []
    for k in order.tolist():
        p = int(pos[k])
        i = bisect.bisect_left(kept, p)
        if i < len(kept) and kept[i] - p < width:
            continue
        if i > 0 and p - kept[i - 1] < width:
            continue
        kept.insert(i, p)
        result.append((p, float(corr[k])))
    return result


def _near_period(p: int, locations: list[int], period: float, tolerance: float) -> bool:
    i = bisect.bisect_left(locations, p)
    dists = [abs(p - locations[j]) for j in (i - 1, i) if 0 <= j < len(locations)]
    gap = min(dists)
    k = round(gap / period)
    return k >= 1 and abs(gap - k * period) <= tolerance * period


def locate_operations(
    recording,
    seed_segment,
    expected_count: int | None = None,
    *,
    threshold: float = DEFAULT_LOCATOR_THRESHOLD,
    coarse_step: int = 4,
    reject_floor: float = DEFAULT_REJECT_FLOOR,
    period_tolerance: float = 0.25,
) -> LocatedOperations:
    """Find occurrences of ``seed_segment`` in ``recording``.

    The correlation is scanned every ``coarse_step`` samples; wherever it
    reaches ``reject_floor`` the neighbourhood is rescanned at full
    resolution. Peaks are thinned by non-maximum suppression over one seed
    length. Peaks at or above ``threshold`` are located operations; weaker
    peaks that sit a whole number of periods away from a located operation
    are reported as rejected (malformed) candidates.
    """
    x = _samples(recording)
    seed = _samples(seed_segment)
    span = int(seed.size)
    if span < 2 or span >= x.size:
        raise InvalidArgumentError("seed segment must be at least 2 samples and shorter than the recording")
    if coarse_step < 1:
        raise InvalidArgumentError("coarse_step must be >= 1")
    if not reject_floor <= threshold:
        raise InvalidArgumentError("reject_floor must not exceed threshold")
    last = x.size - span
    coarse = np.arange(0, last + 1, coarse_step, dtype=np.int64)
    corr = sliding_pearson(x, seed, coarse)

    hot = coarse[corr >= reject_floor]
    if hot.size == 0:
        return LocatedOperations((), span)
    # refine each coarse hit over the samples between its neighbours
    fine = np.unique(
        np.clip(hot[:, None] + np.arange(-coarse_step + 1, coarse_step)[None, :], 0, last)
    )
    fine_corr = sliding_pearson(x, seed, fine)
    peaks = _non_max_suppression(fine, fine_corr, span)

    strong = sorted(p for p in peaks if p[1] >= threshold)
    weak = sorted(p for p in peaks if reject_floor <= p[1] < threshold)
    rejected: list[tuple[int, str]] = []
    if expected_count is not None and len(strong) > expected_count:
        ranked = sorted(strong, key=lambda p: (-p[1], p[0]))
        for p, r in ranked[expected_count:]:
            rejected.append((p, f"correlation {r:.3f} ranks beyond expected count {expected_count}"))
        strong = sorted(ranked[:expected_count])

    locations = [p for p, _ in strong]
    period = None
    if len(locations) >= 2:
        period = float(np.median(np.diff(locations)))
    elif expected_count:
        period = x.size / expected_count
    for p, r in weak:
        if period is None or not locations or _near_period(p, locations, period, period_tolerance):
            rejected.append((p, f"correlation {r:.3f} below threshold {threshold:.3f}"))
    rejected.sort()
    if expected_count is not None and len(locations) != expected_count:
        log.info("located %d operations, expected %d", len(locations), expected_count)
    return LocatedOperations(tuple(locations), span, tuple(rejected), tuple(r for _, r in strong))


def build_template(recording, ops: LocatedOperations, length_n: int, *,
                   positional_buffer: int = 0, precision: int | None = None) -> Template:
    """Average the located windows sample by sample (integer mean, halves away from zero)."""
    x = _samples(recording)
    if precision is None:
        precision = recording.precision if isinstance(recording, Trace) else 14
    if len(ops) == 0:
        raise InvalidArgumentError("cannot build a template from zero located operations")
    if length_n < 1:
        raise InvalidArgumentError("length_n must be >= 1")
    locs = np.asarray(ops.locations, dtype=np.int64)
    if locs.min() < 0 or locs.max() + length_n > x.size:
        raise InvalidArgumentError("a located window extends past the recording")
    idx = locs[:, None] + np.arange(length_n)[None, :]
    total = x[idx].astype(np.int64).sum(axis=0)
    k = locs.size
    mean = np.sign(total) * ((2 * np.abs(total) + k) // (2 * k))
    return Template(mean, positional_buffer=positional_buffer, precision=precision)


def subsample_template(template: Template, stride: int) -> Template:
    """Compare only every ``stride``-th sample (phase 0)."""
    if int(stride) < 1:
        raise InvalidArgumentError(f"stride must be >= 1, got {stride}")
    return replace(template, stride=int(stride))


def background_starts(n_samples: int, span: int, locations, step: int = DEFAULT_BACKGROUND_STEP) -> np.ndarray:
    """Every ``step``-th window start lying at least one span away from all locations."""
    starts = np.arange(0, n_samples - span + 1, step, dtype=np.int64)
    locs = np.asarray(sorted(locations), dtype=np.int64)
    if locs.size == 0 or starts.size == 0:
        return starts
    i = np.searchsorted(locs, starts)
    right = np.abs(locs[np.minimum(i, locs.size - 1)] - starts)
    left = np.abs(starts - locs[np.maximum(i - 1, 0)])
    return starts[np.minimum(left, right) >= span]


def calibrate(
    recording,
    ops: LocatedOperations,
    template: Template,
    offset_range: Iterable[int],
    *,
    background_step: int = DEFAULT_BACKGROUND_STEP,
) -> tuple[IntervalTemplate, CalibrationReport]:
    """Choose the corridor offset and threshold that best separate operations from background.

    For each offset the true set is every located window and the background
    set every ``background_step``-th window start away from them, plus the
    malformed candidates listed in ``ops.rejected``. The offset
    with the largest ``min(true) - max(background)`` wins (smallest offset on
    ties) and the threshold is the midpoint, rounded up.
    """
    x = _samples(recording)
    offsets = sorted({int(o) for o in offset_range})
    if not offsets:
        raise InvalidArgumentError("offset_range is empty")
    if offsets[0] < 0:
        raise InvalidArgumentError("offsets must be >= 0")
    if len(ops) == 0:
        raise InvalidArgumentError("calibration needs at least one located operation")
    base = make_interval_template(template, offsets[0])
    span = base.span
    locs = np.asarray(ops.locations, dtype=np.int64)
    if locs.min() < 0 or locs.max() + span > x.size:
        raise InvalidArgumentError("a located window extends past the recording")
    bg = background_starts(x.size, span, locs, background_step)
    # malformed candidates flagged by the locator are negatives by definition
    flagged = [i for i, _ in ops.rejected if 0 <= i and i + span <= x.size]
    if flagged:
        bg = np.union1d(bg, np.asarray(flagged, dtype=np.int64))
    if bg.size == 0:
        raise InvalidArgumentError("recording has no operation-free background windows")

    best: tuple[int, IntervalTemplate, CalibrationReport] | None = None
    for off in offsets:
        it = make_interval_template(template, off)
        true_min = int(_kernels.interval_scores_for(x, it.lower, it.upper, it.source_stride, locs).min())
        bg_max = int(_kernels.interval_scores_for(x, it.lower, it.upper, it.source_stride, bg).max())
        margin = true_min - bg_max
        thr = min(max(-(-(true_min + bg_max) // 2), 0), it.m)
        report = CalibrationReport(off, thr, true_min, bg_max, margin, it.m, int(locs.size), int(bg.size))
        log.debug("offset %d: true_min=%d bg_max=%d margin=%d", off, true_min, bg_max, margin)
        if best is None or margin > best[0]:
            best = (margin, it, report)
    margin, it, report = best
    if margin <= 0:
        raise CalibrationFailedError(
            f"no offset in [{offsets[0]}, {offsets[-1]}] separates operations from background "
            f"(best margin {margin} at offset {report.chosen_offset})",
            report,
        )
    return it.with_threshold(report.chosen_threshold), report
