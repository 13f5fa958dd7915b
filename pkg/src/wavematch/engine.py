"""Block-parallel interval matcher.

Three ways of matching a stream against an :class:`IntervalTemplate`:

* :class:`MatchingEngine` / :func:`run_engine` -- cycle-accurate model of the
  hardware datapath. Every clock it ingests ``d`` samples into a shift
  register, evaluates ``d`` matcher lanes, delays the valid bits through an
  ``l``-stage pipeline and feeds them to the trigger logic, which re-aligns
  the trigger with the delayed sample output.
* :func:`scalar_reference_match` -- definitional oracle, position-major.
* :func:`batch_match` -- compiled throughput mode without cycle simulation.

Timing model
------------
Block ``k`` carries stream samples ``[k*d, (k+1)*d)``. Lane ``j`` in cycle
``k`` scores the window starting at ``s = (k - g)*d + j`` where
``g = ceil((span - 1) / d)`` is the number of extra blocks a window needs to
complete, so ``lane == s % d`` and lanes are ordered like their starts. The
score leaves the pipeline ``l`` cycles later. The shift register has
``S = max(g + l + ceil(b / d), g + 1)`` stages (``b`` = positional buffer)
and its oldest stage is the sample output, so the output is the input delayed
by ``S*d`` samples. That is the smallest whole-stage delay at which the
trigger for a window starting at ``s`` can be asserted together with output
sample ``s - b``.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import _kernels
from .exceptions import InvalidArgumentError, NotInitializedError
from .traces import DEFAULT_PRECISION, IntervalTemplate, Trace, as_samples, sample_range


def compute_excess_samples(latency: int, parallelism: int, positional_buffer: int) -> int:
    """Samples buffered beyond the template: ``latency * parallelism + positional_buffer``."""
    if latency < 0 or positional_buffer < 0 or parallelism < 1:
        raise InvalidArgumentError("latency, positional_buffer must be >= 0 and parallelism >= 1")
    return int(latency) * int(parallelism) + int(positional_buffer)


def compute_srg_length(template_length: int, excess: int) -> int:
    """Shift register length: template length plus excess samples."""
    if template_length < 1 or excess < 0:
        raise InvalidArgumentError("template_length must be >= 1 and excess >= 0")
    return int(template_length) + int(excess)


@dataclass(frozen=True)
class EngineConfig:
    """Datapath parameters.

    ``holdoff_samples`` and ``trigger_duration_samples`` default to the
    template window span when left as ``None``.
    """

    parallelism: int = 32
    precision: int = DEFAULT_PRECISION
    latency: int = 4
    positional_buffer: int = 0
    holdoff_samples: int | None = None
    trigger_duration_samples: int | None = None
    idle_value: int = 0

    def __post_init__(self):
        if self.parallelism < 1:
            raise InvalidArgumentError(f"parallelism must be >= 1, got {self.parallelism}")
        if self.latency < 0:
            raise InvalidArgumentError(f"latency must be >= 0, got {self.latency}")
        if self.positional_buffer < 0:
            raise InvalidArgumentError("positional_buffer must be >= 0")
        if self.holdoff_samples is not None and self.holdoff_samples < 1:
            raise InvalidArgumentError("holdoff_samples must be >= 1")
        if self.trigger_duration_samples is not None and self.trigger_duration_samples < 1:
            raise InvalidArgumentError("trigger_duration_samples must be >= 1")
        lo, hi = sample_range(self.precision)
        if not lo <= self.idle_value <= hi:
            raise InvalidArgumentError(f"idle_value {self.idle_value} outside sample range")

    @property
    def excess_samples(self) -> int:
        return compute_excess_samples(self.latency, self.parallelism, self.positional_buffer)

    def srg_length(self, template_length: int) -> int:
        return compute_srg_length(template_length, self.excess_samples)

    def resolve_trigger(self, span: int) -> tuple[int, int]:
        """Return ``(holdoff, duration)`` for a template of the given span."""
        holdoff = self.holdoff_samples if self.holdoff_samples is not None else span
        duration = self.trigger_duration_samples
        if duration is None:
            duration = min(span, holdoff)
        if duration > holdoff:
            raise InvalidArgumentError(
                f"trigger_duration_samples ({duration}) must not exceed holdoff_samples ({holdoff})"
            )
        return holdoff, duration


@dataclass(frozen=True)
class MatchEvent:
    start_index: int
    lane: int
    score: int
    trigger_index: int


@dataclass(frozen=True)
class TriggerState:
    asserted: bool
    remaining_duration: int
    holdoff_remaining: int


class ShiftRegister:
    """``stages`` register stages of ``width`` samples each.

    Storage is doubled so the stages can always be read as one contiguous,
    arrival-ordered array without copying.
    """

    def __init__(self, stages: int, width: int, fill: int = 0):
        if stages < 1 or width < 1:
            raise InvalidArgumentError("stages and width must be >= 1")
        self.stages = stages
        self.width = width
        self.capacity = stages * width
        self._buf = np.full(2 * self.capacity, fill, dtype=np.int16)
        self._head = 0

    def push(self, block: np.ndarray) -> np.ndarray:
        """Insert ``block`` as the newest stage and return the evicted oldest stage."""
        lo = self._head * self.width
        hi = lo + self.width
        evicted = self._buf[lo:hi].copy()
        self._buf[lo:hi] = block
        self._buf[lo + self.capacity:hi + self.capacity] = block
        self._head = (self._head + 1) % self.stages
        return evicted

    @property
    def origin(self) -> int:
        """Offset in the backing buffer of the oldest stored sample."""
        return self._head * self.width

    def window(self) -> np.ndarray:
        """All stored samples, oldest first (read-only view)."""
        view = self._buf[self.origin:self.origin + self.capacity]
        view.flags.writeable = False
        return view


class TriggerLogic:
    """Hold-off filtering of valid lanes and trigger pulse generation.

    A valid window at ``s`` is accepted when no accepted window lies within
    ``holdoff`` samples before it. Accepted windows schedule a pulse on output
    samples ``[s - positional_buffer, s - positional_buffer + duration)``.
    """

    def __init__(self, holdoff: int, duration: int, positional_buffer: int = 0):
        self.holdoff = holdoff
        self.duration = duration
        self.positional_buffer = positional_buffer
        self._last: int | None = None
        self._pulses: deque[tuple[int, int]] = deque()
        self._position = 0

    def offer(self, starts: np.ndarray, scores: np.ndarray, parallelism: int,
              position: int) -> list[MatchEvent]:
        """Filter valid windows; ``position`` is the first output index of this cycle."""
        accepted = []
        for s, sc in zip(starts.tolist(), scores.tolist()):
            if self._last is not None and s - self._last < self.holdoff:
                continue
            self._last = s
            begin = s - self.positional_buffer
            # alignment contract: the pulse never starts on an already emitted sample
            assert max(begin, 0) >= position, (begin, position)
            self._pulses.append((begin, begin + self.duration))
            accepted.append(MatchEvent(s, s % parallelism, sc, max(begin, 0)))
        return accepted

    def emit(self, first: int, width: int) -> np.ndarray:
        """Trigger bits accompanying output samples ``[first, first + width)``."""
        bits = np.zeros(width, dtype=np.uint8)
        last = first + width
        for begin, end in self._pulses:
            if begin >= last:
                break
            bits[max(begin, first) - first:min(end, last) - first] = 1
        while self._pulses and self._pulses[0][1] <= last:
            self._pulses.popleft()
        self._position = last
        return bits

    def state(self) -> TriggerState:
        pos = self._position
        remaining = 0
        if self._pulses and self._pulses[0][0] <= pos < self._pulses[0][1]:
            remaining = self._pulses[0][1] - pos
        holdoff = 0
        if self._last is not None:
            holdoff = max(0, self._last + self.holdoff - (pos + self.positional_buffer))
        return TriggerState(remaining > 0, remaining, holdoff)


class StepOutput(NamedTuple):
    samples: np.ndarray
    """The ``d`` samples leaving the shift register this cycle."""
    valid: np.ndarray
    """Per-lane valid bits leaving the latency pipeline this cycle."""
    trigger: np.ndarray
    """Trigger bit for each output sample."""
    output_index: int
    """Stream index of ``samples[0]`` (negative while idle fill drains)."""


class MatchingEngine:
    """Cycle-accurate model of the parallel matcher.

    >>> eng = MatchingEngine(EngineConfig(parallelism=4, latency=1))
    >>> eng.load(it)                      # doctest: +SKIP
    >>> out = eng.step(block_of_4)        # doctest: +SKIP
    """

    def __init__(self, config: EngineConfig | None = None):
        self.config = config or EngineConfig()
        self._template: IntervalTemplate | None = None

    def load(self, template: IntervalTemplate) -> None:
        if template.m > _kernels.MAX_POSITIONS:
            raise InvalidArgumentError(f"at most {_kernels.MAX_POSITIONS} compared positions supported")
        if template.precision != self.config.precision:
            raise InvalidArgumentError(
                f"template precision {template.precision} != engine precision {self.config.precision}"
            )
        self._template = template
        self.reset()

    @property
    def template(self) -> IntervalTemplate:
        if self._template is None:
            raise NotInitializedError("no interval template loaded")
        return self._template

    def reset(self) -> None:
        it = self.template
        cfg = self.config
        d = cfg.parallelism
        span = it.span
        self._holdoff, self._duration = cfg.resolve_trigger(span)
        self._lookahead = math.ceil((span - 1) / d)
        self.stages = max(
            self._lookahead + cfg.latency + math.ceil(cfg.positional_buffer / d),
            self._lookahead + 1,
        )
        self.srg = ShiftRegister(self.stages, d, cfg.idle_value)
        self.trigger_logic = TriggerLogic(self._holdoff, self._duration, cfg.positional_buffer)
        self._pipeline: deque = deque()
        # lane j of the current cycle starts (g + 1) stages before the newest sample
        self._lane_base = (self.stages - 1 - self._lookahead) * d
        self._scores = np.zeros(d, dtype=np.int16)
        self._valid = np.zeros(d, dtype=np.bool_)
        self._no_valid = np.zeros(d, dtype=np.bool_)
        self._no_valid.flags.writeable = False
        self._lane_offsets = np.arange(d, dtype=np.int64)
        self.cycle = 0
        self.received = 0
        self._ended = False
        self.events: list[MatchEvent] = []

    @property
    def output_delay(self) -> int:
        """Samples between a sample entering and leaving the shift register."""
        return self.stages * self.config.parallelism

    @property
    def srg_length(self) -> int:
        return self.config.srg_length(self.template.span)

    def step(self, block, n_valid: int | None = None) -> StepOutput:
        """Clock one block of ``d`` samples through the datapath.

        ``n_valid`` marks how many leading samples of the block are real
        stream data; once a block is short, later blocks must carry none.
        """
        if self._template is None:
            raise NotInitializedError("load an interval template before stepping")
        cfg = self.config
        d = cfg.parallelism
        block = np.asarray(block)
        if block.dtype != np.int16:
            block = as_samples(block, cfg.precision)
        if block.shape != (d,):
            raise InvalidArgumentError(f"block must hold exactly {d} samples, got shape {block.shape}")
        n_valid = d if n_valid is None else int(n_valid)
        if not 0 <= n_valid <= d:
            raise InvalidArgumentError(f"n_valid must lie in [0, {d}]")
        if self._ended and n_valid:
            raise InvalidArgumentError("stream already ended with a partial block")
        if n_valid < d:
            self._ended = True
        self.received += n_valid

        k = self.cycle
        out_samples = self.srg.push(block)

        it = self.template
        group = k - self._lookahead
        if group >= 0:
            n_hits = _kernels.lane_scores(
                self.srg._buf, self.srg.origin + self._lane_base, d, it.source_stride,
                it.lower, it.upper, it.threshold, self._scores, self._valid,
            )
            starts = group * d + self._lane_offsets
            if n_hits and self._ended:
                self._valid &= starts + it.span <= self.received
                n_hits = int(self._valid.sum())
            if n_hits:
                entry = (starts, self._scores.copy(), self._valid.copy())
            else:
                entry = None
        else:
            entry = None
        self._pipeline.append(entry)

        if len(self._pipeline) > cfg.latency:
            entry = self._pipeline.popleft()
        else:
            entry = None
        output_index = (k - self.stages) * d
        if entry is None:
            valid = self._no_valid
        else:
            starts, scores, valid = entry
            idx = np.flatnonzero(valid)
            self.events.extend(self.trigger_logic.offer(starts[idx], scores[idx], d, output_index))

        trigger = self.trigger_logic.emit(output_index, d)
        self.cycle += 1
        return StepOutput(out_samples, valid, trigger, output_index)


@dataclass
class EngineRun:
    events: list[MatchEvent]
    trigger: np.ndarray
    output: np.ndarray
    output_delay: int
    cycles: int
    srg_length: int = field(default=0)


def _stream_samples(stream, precision: int = DEFAULT_PRECISION) -> np.ndarray:
    if isinstance(stream, Trace):
        return stream.samples
    return as_samples(stream, precision)


def run_engine(stream, template: IntervalTemplate, config: EngineConfig | None = None) -> EngineRun:
    """Drive :class:`MatchingEngine` over a whole stream.

    The last partial block is padded with ``idle_value`` and windows reaching
    into the padding never match. Idle blocks are clocked until every stream
    sample has left the shift register, so ``trigger`` has one bit per stream
    sample and ``output[output_delay:]`` reproduces the stream.
    """
    config = config or EngineConfig(precision=template.precision)
    x = _stream_samples(stream, config.precision)
    n = int(x.size)
    engine = MatchingEngine(config)
    engine.load(template)
    if n == 0:
        return EngineRun([], np.zeros(0, np.uint8), np.zeros(0, np.int16), engine.output_delay, 0,
                         engine.srg_length)
    d = config.parallelism
    n_blocks = math.ceil(n / d)
    padded = np.full(n_blocks * d, config.idle_value, dtype=np.int16)
    padded[:n] = x
    cycles = math.ceil((n + engine.output_delay) / d)
    idle = np.full(d, config.idle_value, dtype=np.int16)
    out = np.empty(cycles * d, dtype=np.int16)
    trig = np.empty(cycles * d, dtype=np.uint8)
    for c in range(cycles):
        if c < n_blocks:
            block = padded[c * d:(c + 1) * d]
            n_valid = min(d, n - c * d)
        else:
            block, n_valid = idle, 0
        res = engine.step(block, n_valid)
        out[c * d:(c + 1) * d] = res.samples
        trig[c * d:(c + 1) * d] = res.trigger
    delay = engine.output_delay
    return EngineRun(engine.events, trig[delay:delay + n].copy(), out, delay, cycles, engine.srg_length)


def apply_holdoff(starts, holdoff: int) -> np.ndarray:
    """Greedy hold-off over ascending ``starts``; returns a boolean keep-mask."""
    starts = np.asarray(starts, dtype=np.int64)
    keep = np.zeros(starts.size, dtype=bool)
    last = None
    for i, s in enumerate(starts.tolist()):
        if last is None or s - last >= holdoff:
            keep[i] = True
            last = s
    return keep


def _events_from(starts, scores, template, config) -> list[MatchEvent]:
    d = config.parallelism
    holdoff, _ = config.resolve_trigger(template.span)
    keep = apply_holdoff(starts, holdoff)
    pb = config.positional_buffer
    return [
        MatchEvent(int(s), int(s) % d, int(sc), max(int(s) - pb, 0))
        for s, sc in zip(np.asarray(starts)[keep], np.asarray(scores)[keep])
    ]


def scalar_reference_match(stream, template: IntervalTemplate,
                           config: EngineConfig | None = None) -> list[MatchEvent]:
    """Oracle: evaluate the interval score at every start and apply the hold-off.

    Scores are accumulated one template position at a time across all starts,
    straight from the definition, with none of the engine's block structure.
    """
    config = config or EngineConfig(precision=template.precision)
    x = _stream_samples(stream, template.precision)
    span = template.span
    n_starts = x.size - span + 1
    if n_starts <= 0:
        return []
    counts = np.zeros(n_starts, dtype=np.int32)
    for i in range(template.m):
        o = i * template.source_stride
        seg = x[o:o + n_starts]
        counts += (seg >= template.lower[i]) & (seg <= template.upper[i])
    starts = np.flatnonzero(counts >= template.threshold)
    return _events_from(starts, counts[starts], template, config)


class BatchMatches(NamedTuple):
    starts: np.ndarray
    scores: np.ndarray


def batch_match(stream, template: IntervalTemplate) -> BatchMatches:
    """Every window start whose interval score reaches the threshold, no hold-off."""
    x = _stream_samples(stream, template.precision)
    if x.size < template.span:
        return BatchMatches(np.zeros(0, np.int64), np.zeros(0, np.int32))
    scores = _kernels.all_interval_scores(x, template.lower, template.upper, template.source_stride)
    starts = np.flatnonzero(scores >= template.threshold)
    return BatchMatches(starts, scores[starts])


def batch_events(stream, template: IntervalTemplate, config: EngineConfig | None = None) -> list[MatchEvent]:
    """:func:`batch_match` followed by the engine's hold-off policy."""
    config = config or EngineConfig(precision=template.precision)
    found = batch_match(stream, template)
    return _events_from(found.starts, found.scores, template, config)
