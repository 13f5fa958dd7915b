"""Deterministic synthetic side-channel recordings.

Noise comes from numpy's counter-based Philox generator keyed by
``(seed, channel)`` and addressed by absolute sample index, so any sample
range can be generated independently and concatenated bit-identically.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Literal, Mapping, NamedTuple

import numpy as np

from .exceptions import InvalidArgumentError
from .traces import DEFAULT_PRECISION, Template, Trace, clamp_samples

NoiseKind = Literal["uniform", "gaussian"]

_BACKGROUND, _EMBED_NOISE, _DEFORM, _LAYOUT, _PATTERN = range(5)
_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class NoiseSpec:
    kind: NoiseKind = "gaussian"
    amplitude: int = 0
    """Half-width for uniform noise, standard deviation for gaussian (ADC codes)."""

    def __post_init__(self):
        if self.kind not in ("uniform", "gaussian"):
            raise InvalidArgumentError(f"noise kind must be uniform or gaussian, got {self.kind!r}")
        if self.amplitude < 0:
            raise InvalidArgumentError("noise amplitude must be >= 0")


@dataclass(frozen=True)
class Embedding:
    pattern_id: str
    position: int
    scale: Fraction = Fraction(1)
    vertical_offset: int = 0
    noise_amplitude: int = 0
    deform_prefix: int = 0

    def __post_init__(self):
        object.__setattr__(self, "scale", Fraction(self.scale))
        if self.position < 0 or self.deform_prefix < 0 or self.noise_amplitude < 0:
            raise InvalidArgumentError("position, deform_prefix and noise_amplitude must be >= 0")


@dataclass(frozen=True)
class SynthSpec:
    length: int
    seed: int
    background: NoiseSpec = field(default_factory=NoiseSpec)
    embeddings: tuple[Embedding, ...] = ()
    precision: int = DEFAULT_PRECISION
    sample_rate_hz: float = 10e9

    def __post_init__(self):
        if self.length < 0:
            raise InvalidArgumentError("length must be >= 0")
        object.__setattr__(self, "embeddings", tuple(self.embeddings))

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["embeddings"] = [
            {**asdict(e), "scale": str(e.scale)} for e in self.embeddings
        ]
        return doc

    @classmethod
    def from_dict(cls, doc: Mapping) -> SynthSpec:
        return cls(
            length=int(doc["length"]),
            seed=int(doc["seed"]),
            background=NoiseSpec(**doc.get("background", {})),
            embeddings=tuple(
                Embedding(**{**e, "scale": Fraction(str(e.get("scale", 1)))})
                for e in doc.get("embeddings", ())
            ),
            precision=int(doc.get("precision", DEFAULT_PRECISION)),
            sample_rate_hz=float(doc.get("sample_rate_hz", 10e9)),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> SynthSpec:
        return cls.from_dict(json.loads(Path(path).read_text()))


class GroundTruth(NamedTuple):
    position: int
    pattern_id: str
    well_formed: bool


def _raw(seed: int, channel: int, first_word: int, n_words: int) -> np.ndarray:
    block, skip = divmod(first_word, 4)
    gen = np.random.Philox(key=np.array([seed & _MASK64, channel], dtype=np.uint64), counter=block)
    return gen.random_raw(skip + n_words)[skip:]


def counter_uniform(seed: int, channel: int, start: int, count: int, lo: int, hi: int) -> np.ndarray:
    """Integers in ``[lo, hi]`` for sample indices ``start .. start+count-1``."""
    if count <= 0:
        return np.zeros(0, dtype=np.int64)
    width = np.uint64(hi - lo + 1)
    raw = _raw(seed, channel, start, count)
    # multiply-shift range reduction on the top 32 bits
    return ((raw >> np.uint64(32)) * width >> np.uint64(32)).astype(np.int64) + lo


def counter_gaussian(seed: int, channel: int, start: int, count: int, sigma: float) -> np.ndarray:
    """Rounded N(0, sigma^2) samples via Box-Muller, two words per sample."""
    if count <= 0:
        return np.zeros(0, dtype=np.int64)
    raw = _raw(seed, channel, 2 * start, 2 * count).reshape(count, 2)
    u1 = ((raw[:, 0] >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0**-53
    u2 = (raw[:, 1] >> np.uint64(11)).astype(np.float64) * 2.0**-53
    z = np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)
    return np.rint(sigma * z).astype(np.int64)


def _noise(kind: str, amplitude: int, seed: int, channel: int, start: int, count: int) -> np.ndarray:
    if amplitude == 0:
        return np.zeros(count, dtype=np.int64)
    if kind == "uniform":
        return counter_uniform(seed, channel, start, count, -amplitude, amplitude)
    return counter_gaussian(seed, channel, start, count, amplitude)


def _scaled(pattern: np.ndarray, scale: Fraction) -> np.ndarray:
    """``round(pattern * scale)`` with halves away from zero, in exact integers."""
    num = pattern.astype(np.int64) * scale.numerator
    den = scale.denominator
    mag = (2 * np.abs(num) + den) // (2 * den)
    return np.sign(num) * mag


def _check_layout(spec: SynthSpec, patterns: Mapping[str, Template]) -> list[Embedding]:
    embs = sorted(spec.embeddings, key=lambda e: e.position)
    prev_end = 0
    for e in embs:
        if e.pattern_id not in patterns:
            raise InvalidArgumentError(f"unknown pattern id {e.pattern_id!r}")
        n = len(patterns[e.pattern_id])
        if e.deform_prefix > n:
            raise InvalidArgumentError(f"deform_prefix {e.deform_prefix} exceeds pattern length {n}")
        if e.position < prev_end:
            raise InvalidArgumentError(f"embedding at {e.position} overlaps the previous one (ends {prev_end})")
        prev_end = e.position + n
        if prev_end > spec.length:
            raise InvalidArgumentError(f"embedding at {e.position} runs past the trace end {spec.length}")
    return embs


def generate_range(spec: SynthSpec, patterns: Mapping[str, Template], start: int, stop: int) -> np.ndarray:
    """Samples ``[start, stop)`` of the trace described by ``spec``."""
    start, stop = max(0, int(start)), min(spec.length, int(stop))
    if stop <= start:
        return np.zeros(0, dtype=np.int16)
    embs = _check_layout(spec, patterns)
    bg = spec.background
    out = _noise(bg.kind, bg.amplitude, spec.seed, _BACKGROUND, start, stop - start)
    for e in embs:
        pat = patterns[e.pattern_id].samples
        lo, hi = max(start, e.position), min(stop, e.position + pat.size)
        if lo >= hi:
            continue
        shaped = _scaled(pat, e.scale)
        seg = shaped[lo - e.position:hi - e.position].copy()
        k_end = min(hi, e.position + e.deform_prefix)
        if k_end > lo:
            seg[:k_end - lo] = counter_uniform(
                spec.seed, _DEFORM, lo, k_end - lo, int(shaped.min()), int(shaped.max())
            )
        seg += e.vertical_offset
        seg += _noise(bg.kind, e.noise_amplitude, spec.seed, _EMBED_NOISE, lo, hi - lo)
        out[lo - start:hi - start] = seg
    return clamp_samples(out, spec.precision).astype(np.int16)


def generate(spec: SynthSpec, patterns: Mapping[str, Template]) -> tuple[Trace, list[GroundTruth]]:
    """Render the full trace and the list of embeddings it contains."""
    embs = _check_layout(spec, patterns)
    samples = generate_range(spec, patterns, 0, spec.length)
    trace = Trace(samples, spec.sample_rate_hz, label=f"synth seed={spec.seed}", precision=spec.precision)
    truth = [GroundTruth(e.position, e.pattern_id, e.deform_prefix == 0) for e in embs]
    return trace, truth


def smooth_pattern(length: int, seed: int, amplitude: int = 3000, correlation_length: int = 6,
                   precision: int = DEFAULT_PRECISION) -> Template:
    """Low-pass filtered noise normalised to peak ``amplitude``; stands in for an operation's waveform."""
    if length < 1:
        raise InvalidArgumentError("length must be >= 1")
    width = max(1, int(correlation_length))
    raw = counter_gaussian(seed, _PATTERN, 0, length + 2 * width, 1000.0).astype(np.float64)
    kernel = np.hanning(2 * width + 1) if width > 1 else np.ones(1)
    smooth = np.convolve(raw, kernel / kernel.sum(), mode="same")[width:width + length]
    peak = float(np.max(np.abs(smooth))) or 1.0
    return Template(np.rint(smooth / peak * amplitude).astype(np.int64), precision=precision)


def repeated_operation_scenario(
    count: int = 256,
    deformed: int = 2,
    pattern_length: int = 2800,
    gap: int = 1200,
    jitter: int = 100,
    seed: int = 0,
    background: NoiseSpec = NoiseSpec("gaussian", 300),
    operation_noise: int = 60,
    deform_fraction: float = 0.4,
    amplitude: int = 3000,
) -> tuple[SynthSpec, dict[str, Template]]:
    """A recording of ``count`` back-to-back operations, the first ``deformed`` of them malformed.

    Operations start every ``pattern_length + gap`` samples, shifted by a
    per-operation jitter in ``[-jitter, jitter]``.
    """
    if not 0 <= deformed <= count:
        raise InvalidArgumentError("deformed must lie in [0, count]")
    if 2 * jitter >= gap:
        raise InvalidArgumentError("jitter must be below half the gap to keep operations apart")
    pattern = smooth_pattern(pattern_length, seed, amplitude)
    period = pattern_length + gap
    offsets = counter_uniform(seed, _LAYOUT, 0, count, -jitter, jitter)
    lead = gap // 2 + jitter
    prefix = int(math.ceil(deform_fraction * pattern_length))
    embeddings = tuple(
        Embedding(
            "op",
            lead + i * period + int(offsets[i]),
            noise_amplitude=operation_noise,
            deform_prefix=prefix if i < deformed else 0,
        )
        for i in range(count)
    )
    length = lead + count * period + jitter
    spec = SynthSpec(length=length, seed=seed, background=background, embeddings=embeddings)
    return spec, {"op": pattern}
