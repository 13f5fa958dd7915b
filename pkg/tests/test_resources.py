import pytest
from hypothesis import given, strategies as st

from wavematch.exceptions import InvalidArgumentError
from wavematch.resources import (
    ANCHORS,
    KU85,
    DeviceProfile,
    estimate_luts,
    load_device_profiles,
    max_template_length,
)

TABLE = [
    (700, "lut_based", 169_386, 34),
    (1400, "lut_based", 338_948, 68),
    (2800, "lut_based", 680_472, 137),
    (700, "carry_logic", 611_651, 123),
    (1400, "carry_logic", 1_222_969, 245),
    (2800, "carry_logic", 2_447_523, 492),
]


@pytest.mark.parametrize("m,style,luts,percent", TABLE)
def test_anchor_values(m, style, luts, percent):
    est = estimate_luts(m, style, 32)
    assert est.luts == luts
    assert abs(est.utilization_percent - percent) <= 1.0
    assert est.fits == (luts <= KU85.lut_capacity)


def test_examples():
    e = estimate_luts(2800, "carry_logic", 32)
    assert e.luts == 2_447_523 and not e.fits
    e = estimate_luts(700, "lut", 32)
    assert e.luts == 169_386 and e.fits and round(e.utilization_percent) == 34
    assert e.comparator_luts_per_sample == 6
    assert estimate_luts(700, "carry", 32).comparator_luts_per_sample == 22


def test_max_template_length():
    assert abs(max_template_length(KU85, "lut_based", 32, 0.32) - 1400) <= 5
    assert max_template_length(0) == 0
    with pytest.raises(InvalidArgumentError):
        DeviceProfile("empty", 0)
    with pytest.raises(InvalidArgumentError):
        max_template_length(KU85, reserve_fraction=1.0)


@given(st.integers(1, 50_000), st.sampled_from(["lut_based", "carry_logic"]), st.integers(1, 64))
def test_monotone_and_carry_costlier(m, style, d):
    assert estimate_luts(m + 1, style, d).luts >= estimate_luts(m, style, d).luts
    assert estimate_luts(m, "carry_logic", d).luts > estimate_luts(m, "lut_based", d).luts


@given(st.integers(1, 4000), st.sampled_from(["lut_based", "carry_logic"]))
def test_strictly_increasing_at_reference_parallelism(m, style):
    assert estimate_luts(m + 1, style, 32).luts > estimate_luts(m, style, 32).luts


@given(st.integers(1_000, 5_000_000), st.floats(0.0, 0.9))
def test_max_length_is_tight(capacity, reserve):
    dev = DeviceProfile("x", capacity)
    m = max_template_length(dev, "lut_based", 32, reserve)
    budget = (1 - reserve) * capacity
    if m:
        assert estimate_luts(m, "lut_based", 32, dev).luts <= budget
    assert estimate_luts(m + 1, "lut_based", 32, dev).luts > budget


def test_parallelism_scales_linearly():
    assert estimate_luts(1400, "lut", 16).luts == 338_948 // 2
    assert estimate_luts(1400, "lut", 64).luts == 2 * 338_948


def test_invalid_inputs():
    with pytest.raises(InvalidArgumentError):
        estimate_luts(0)
    with pytest.raises(InvalidArgumentError):
        estimate_luts(10, "dsp")
    with pytest.raises(InvalidArgumentError):
        estimate_luts(10, parallelism=0)


def test_device_profiles_from_yaml(tmp_path):
    p = tmp_path / "dev.yaml"
    p.write_text("devices:\n  - name: small\n    lut_capacity: 100000\n")
    profiles = load_device_profiles(p)
    assert profiles["small"].lut_capacity == 100_000 and "KU85" in profiles
    p.write_text("big: 2000000\n")
    assert load_device_profiles(p)["big"].lut_capacity == 2_000_000


def test_anchor_table_is_consistent():
    for style, pts in ANCHORS.items():
        assert [m for m, _ in pts] == [700, 1400, 2800]
