from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wavematch.exceptions import InvalidArgumentError
from wavematch.synth import (
    Embedding,
    NoiseSpec,
    SynthSpec,
    counter_gaussian,
    counter_uniform,
    generate,
    generate_range,
    repeated_operation_scenario,
    smooth_pattern,
)
from wavematch.traces import Template


def small_spec(seed=5, kind="gaussian"):
    embs = (
        Embedding("a", 100, noise_amplitude=50),
        Embedding("b", 400, scale=Fraction(3, 2), vertical_offset=-200, deform_prefix=10),
        Embedding("a", 700, noise_amplitude=0),
    )
    return SynthSpec(1000, seed, NoiseSpec(kind, 500), embs), {
        "a": smooth_pattern(200, 1),
        "b": Template(np.arange(-100, 100) * 30),
    }


def test_verbatim_embedding():
    pat = smooth_pattern(64, 2)
    spec = SynthSpec(500, 0, NoiseSpec("uniform", 0), (Embedding("p", 123),))
    trace, truth = generate(spec, {"p": pat})
    assert np.array_equal(trace.samples[123:187], pat.samples)
    assert np.all(trace.samples[:123] == 0) and np.all(trace.samples[187:] == 0)
    assert truth == [(123, "p", True)]


def test_scenario_ground_truth(scenario):
    assert len(scenario.truth) == 256
    assert sum(t.well_formed for t in scenario.truth) == 254
    assert [t.position for t in scenario.truth[:2]] == scenario.bad


def test_deterministic():
    spec, pats = small_spec()
    a, _ = generate(spec, pats)
    b, _ = generate(spec, pats)
    assert a == b
    c, _ = generate(SynthSpec(spec.length, spec.seed + 1, spec.background, spec.embeddings), pats)
    assert a != c


@settings(max_examples=40)
@given(st.lists(st.integers(0, 1000), max_size=6), st.sampled_from(["uniform", "gaussian"]))
def test_partition_invariance(cuts, kind):
    spec, pats = small_spec(kind=kind)
    whole = generate_range(spec, pats, 0, spec.length)
    edges = [0, *sorted(cuts), spec.length]
    pieces = [generate_range(spec, pats, a, b) for a, b in zip(edges, edges[1:])]
    assert np.array_equal(np.concatenate(pieces), whole)


def test_scaling_offset_and_deformation():
    spec, pats = small_spec()
    quiet = SynthSpec(spec.length, spec.seed, NoiseSpec("gaussian", 0), spec.embeddings)
    x = generate(quiet, pats)[0].samples.astype(int)
    b = pats["b"].samples.astype(int)
    scaled = np.sign(b * 3) * ((2 * np.abs(b * 3) + 2) // 4)
    assert np.array_equal(x[410:600], scaled[10:] - 200)
    head = x[400:410] + 200
    assert np.all((head >= scaled.min()) & (head <= scaled.max()))
    assert not np.array_equal(head, scaled[:10])


def test_clamping():
    pat = Template([8000, -8000, 100])
    spec = SynthSpec(3, 0, NoiseSpec("uniform", 0), (Embedding("p", 0, scale=2),))
    x = generate(spec, {"p": pat})[0].samples
    assert x.tolist() == [8191, -8192, 200]


def test_counter_streams_are_addressable():
    whole = counter_uniform(7, 0, 0, 100, -5, 5)
    assert np.array_equal(counter_uniform(7, 0, 37, 20, -5, 5), whole[37:57])
    assert whole.min() >= -5 and whole.max() <= 5
    g = counter_gaussian(7, 1, 0, 50_000, 300.0)
    assert np.array_equal(counter_gaussian(7, 1, 123, 10, 300.0), g[123:133])
    assert abs(g.std() - 300) < 6 and abs(g.mean()) < 6


def test_uniform_covers_range():
    u = counter_uniform(1, 0, 0, 20_000, -5, 5)
    counts = np.bincount(u + 5)
    assert counts.size == 11 and counts.min() > 1500


def test_layout_validation():
    pats = {"p": Template(np.arange(10))}
    with pytest.raises(InvalidArgumentError):
        generate(SynthSpec(15, 0, embeddings=(Embedding("p", 0), Embedding("p", 5))), pats)
    with pytest.raises(InvalidArgumentError):
        generate(SynthSpec(15, 0, embeddings=(Embedding("p", 10),)), pats)
    with pytest.raises(InvalidArgumentError):
        generate(SynthSpec(15, 0, embeddings=(Embedding("q", 0),)), pats)
    with pytest.raises(InvalidArgumentError):
        NoiseSpec("pink", 1)
    with pytest.raises(InvalidArgumentError):
        repeated_operation_scenario(count=4, deformed=5)


def test_spec_round_trip(tmp_path):
    spec, _ = small_spec()
    spec.save(tmp_path / "s.json")
    assert SynthSpec.load(tmp_path / "s.json") == spec
