"""LUT footprint model of the parallel matcher on an FPGA.

The model is piecewise linear in the number of compared template positions,
pinned to the three measured design points per adder style at ``d = 32``.
Between and beyond those points it interpolates/extrapolates along the
nearest segment; other parallelism values scale the total linearly with
``d / 32`` (one matcher lane per sample and cycle).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Literal

import yaml

from .exceptions import InvalidArgumentError

AdderStyle = Literal["lut_based", "carry_logic"]

REFERENCE_PARALLELISM = 32

# (template positions, LUTs) measured at d = 32
ANCHORS: dict[str, tuple[tuple[int, int], ...]] = {
    "lut_based": ((700, 169_386), (1400, 338_948), (2800, 680_472)),
    "carry_logic": ((700, 611_651), (1400, 1_222_969), (2800, 2_447_523)),
}

COMPARATOR_LUTS_PER_SAMPLE = {"lut_based": 6, "carry_logic": 22}

_ALIASES = {"lut": "lut_based", "lut_based": "lut_based", "carry": "carry_logic", "carry_logic": "carry_logic"}


@dataclass(frozen=True)
class DeviceProfile:
    name: str
    lut_capacity: int

    def __post_init__(self):
        if self.lut_capacity <= 0:
            raise InvalidArgumentError(f"lut_capacity must be positive, got {self.lut_capacity}")


# capacity chosen so that 338,948 LUTs come to 68 %
KU85 = DeviceProfile("KU85", 498_453)


@dataclass(frozen=True)
class ResourceEstimate:
    luts: int
    utilization_fraction: float
    adder_style: AdderStyle
    comparator_luts_per_sample: int
    fits: bool

    @property
    def utilization_percent(self) -> float:
        return 100.0 * self.utilization_fraction


def adder_style(name: str) -> AdderStyle:
    try:
        return _ALIASES[name]  # type: ignore[return-value]
    except KeyError:
        raise InvalidArgumentError(f"unknown adder style {name!r}; use lut_based or carry_logic") from None


def _segment(style: str, m: float) -> tuple[tuple[int, int], tuple[int, int]]:
    pts = ANCHORS[style]
    if m <= pts[1][0]:
        return pts[0], pts[1]
    return pts[1], pts[2]


def _luts_at_reference(style: str, m: int) -> float:
    (m0, l0), (m1, l1) = _segment(style, m)
    return l0 + (l1 - l0) * (m - m0) / (m1 - m0)


def estimate_luts(template_samples: int, style: str = "lut_based", parallelism: int = 32,
                  device: DeviceProfile = KU85) -> ResourceEstimate:
    """Predict the LUT count for ``template_samples`` compared positions."""
    if template_samples < 1:
        raise InvalidArgumentError(f"template_samples must be >= 1, got {template_samples}")
    if parallelism < 1:
        raise InvalidArgumentError(f"parallelism must be >= 1, got {parallelism}")
    style = adder_style(style)
    raw = _luts_at_reference(style, template_samples) * parallelism / REFERENCE_PARALLELISM
    luts = max(0, math.floor(raw + 0.5))
    frac = luts / device.lut_capacity
    return ResourceEstimate(luts, frac, style, COMPARATOR_LUTS_PER_SAMPLE[style], frac <= 1.0)


def max_template_length(device: DeviceProfile | int, style: str = "lut_based", parallelism: int = 32,
                        reserve_fraction: float = 0.0) -> int:
    """Largest template length whose utilisation stays within ``1 - reserve_fraction``.

    ``device`` may also be a bare LUT capacity; a capacity of 0 yields 0.
    """
    if not 0.0 <= reserve_fraction < 1.0:
        raise InvalidArgumentError(f"reserve_fraction must lie in [0, 1), got {reserve_fraction}")
    capacity = device.lut_capacity if isinstance(device, DeviceProfile) else int(device)
    if capacity <= 0:
        return 0
    style = adder_style(style)
    profile = DeviceProfile("budget", capacity)
    allowed = 1.0 - reserve_fraction

    def fits(m: int) -> bool:
        return estimate_luts(m, style, parallelism, profile).luts <= allowed * capacity

    if not fits(1):
        return 0
    # invert the reference-d line, then settle on the exact integer boundary
    budget = allowed * capacity * REFERENCE_PARALLELISM / parallelism
    (m0, l0), (m1, l1), (m2, l2) = ANCHORS[style]
    guess = m0 + (budget - l0) * (m1 - m0) / (l1 - l0)
    if guess > m1:
        guess = m1 + (budget - l1) * (m2 - m1) / (l2 - l1)
    m = max(1, int(guess))
    while not fits(m) and m > 1:
        m -= 1
    while fits(m + 1):
        m += 1
    return m


def load_device_profiles(path: str | Path) -> dict[str, DeviceProfile]:
    """Read device profiles from a YAML/JSON document.

    Accepted layouts: ``{"devices": [{"name": ..., "lut_capacity": ...}]}`` or a
    plain ``{name: lut_capacity}`` mapping.
    """
    doc = yaml.safe_load(Path(path).read_text())
    if not isinstance(doc, dict):
        raise InvalidArgumentError(f"{path}: expected a mapping of device profiles")
    profiles = {KU85.name: KU85}
    if "devices" in doc:
        for entry in doc["devices"]:
            prof = DeviceProfile(str(entry["name"]), int(entry["lut_capacity"]))
            profiles[prof.name] = prof
    else:
        for name, cap in doc.items():
            profiles[str(name)] = DeviceProfile(str(name), int(cap))
    return profiles
