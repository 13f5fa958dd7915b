"""Acceptance criteria, each checked at its stated tolerance.

Run with ``pytest tests/test_acceptance.py -v``; a summary with one
PASS/FAIL line per criterion is printed at the end of the run.
"""

import math
import time

import numpy as np
import pytest
from click.testing import CliRunner

from wavematch.calibration import build_template, calibrate, locate_operations, subsample_template
from wavematch.cli import cli
from wavematch.engine import (
    EngineConfig,
    batch_match,
    compute_excess_samples,
    compute_srg_length,
    run_engine,
    scalar_reference_match,
)
from wavematch.resources import KU85, estimate_luts, max_template_length
from wavematch.similarity import interval_indicator, interval_score, pearson_correlation, sad
from wavematch.synth import generate, repeated_operation_scenario
from wavematch.traces import Template, make_interval_template

ORACLE_CASES = 500
PARALLELISMS = (1, 4, 8, 16, 32)


def random_case(rng, n_range=(10_000, 100_000), parallelisms=PARALLELISMS):
    """A noisy stream with partial and full copies of a random template embedded."""
    n = int(rng.integers(*n_range, endpoint=True))
    length = int(rng.integers(16, 512, endpoint=True))
    stride = int(rng.choice([1, 2, 4]))
    offset = int(rng.integers(0, 64, endpoint=True))
    d = int(rng.choice(parallelisms))
    amp = int(rng.integers(50, 400))
    pattern = rng.integers(-amp, amp, length)
    x = rng.integers(-amp, amp, n)
    for _ in range(int(rng.integers(0, 40))):
        pos = int(rng.integers(0, max(1, n - length)))
        noise = rng.integers(-offset - 8, offset + 9, length)
        seg = pattern + noise
        x[pos:pos + length] = seg[: n - pos]
    template = Template(pattern, stride=stride)
    it = make_interval_template(template, offset)
    it = it.with_threshold(int(it.m * rng.uniform(0.6, 1.0)))
    holdoff = int(rng.choice([1, int(rng.integers(1, 3 * it.span)), it.span]))
    duration = int(rng.integers(1, holdoff, endpoint=True))
    pb = int(rng.integers(0, 50)) if rng.random() < 0.3 else 0
    cfg = EngineConfig(parallelism=d, latency=int(rng.integers(0, 8)), positional_buffer=pb,
                       holdoff_samples=holdoff, trigger_duration_samples=duration)
    return x, it, cfg


def trigger_problems(x, it, cfg, run):
    """Violations of the hold-off, pulse-width and passthrough contract."""
    problems = []
    holdoff, duration = cfg.resolve_trigger(it.span)
    starts = [e.start_index for e in run.events]
    if any(b - a < holdoff for a, b in zip(starts, starts[1:])):
        problems.append("events closer than hold-off")
    n = x.size
    expected = np.zeros(n, dtype=np.uint8)
    width_total = 0
    for s in starts:
        # a positional buffer can push the pulse of a very early match before sample 0
        begin = s - cfg.positional_buffer
        lo, hi = min(max(begin, 0), n), min(max(begin + duration, 0), n)
        if hi - lo != duration and begin >= 0 and hi != n:
            problems.append(f"pulse at {s} truncated before the stream end")
        expected[lo:hi] = 1
        width_total += hi - lo
    if not np.array_equal(run.trigger, expected) or int(run.trigger.sum()) != width_total:
        problems.append("trigger waveform differs from the pulses of the events")
    g = math.ceil((it.span - 1) / cfg.parallelism)
    stages = max(g + cfg.latency + math.ceil(cfg.positional_buffer / cfg.parallelism), g + 1)
    if run.output_delay != stages * cfg.parallelism:
        problems.append("output delay is not the configured constant")
    if not np.array_equal(run.output[run.output_delay:run.output_delay + n], x):
        problems.append("output passthrough lost or altered samples")
    if run.output[:run.output_delay].size and np.any(run.output[:run.output_delay] != cfg.idle_value):
        problems.append("output before the delay is not idle fill")
    return problems


@pytest.fixture(scope="module")
def oracle_runs():
    rng = np.random.default_rng(20240501)
    t0 = time.perf_counter()
    cases = []
    for _ in range(ORACLE_CASES):
        x, it, cfg = random_case(rng)
        run = run_engine(x, it, cfg)
        ref = scalar_reference_match(x, it, cfg)
        cases.append({
            "d": cfg.parallelism,
            "engine": [(e.start_index, e.score, e.lane) for e in run.events],
            "reference": [(e.start_index, e.score, e.start_index % cfg.parallelism) for e in ref],
            "trigger_problems": trigger_problems(x, it, cfg, run),
        })
    return cases, time.perf_counter() - t0


def test_criterion_1_oracle_equivalence(oracle_runs, criterion):
    rec = criterion(1, "engine vs scalar reference, 500 random cases, < 5 min")
    cases, elapsed = oracle_runs
    bad = sum(c["engine"] != c["reference"] for c in cases)
    matches = sum(len(c["reference"]) for c in cases)
    rec.note(f"{len(cases)} cases, {matches} events, {bad} discrepancies, {elapsed:.0f} s")
    assert len(cases) >= 500
    assert {c["d"] for c in cases} == set(PARALLELISMS)
    assert bad == 0
    assert elapsed < 300


def test_criterion_2_parallelism_invariance(criterion):
    rec = criterion(2, "identical match sets for every parallelism, 100 cases")
    rng = np.random.default_rng(77)
    differing = 0
    for _ in range(100):
        x, it, cfg = random_case(rng, n_range=(2_000, 20_000))
        sets = set()
        for d in (1, 2, 3, 4, 8, 16, 32):
            cfg_d = EngineConfig(parallelism=d, latency=cfg.latency, positional_buffer=cfg.positional_buffer,
                                 holdoff_samples=cfg.holdoff_samples,
                                 trigger_duration_samples=cfg.trigger_duration_samples)
            sets.add(tuple((e.start_index, e.score) for e in run_engine(x, it, cfg_d).events))
        differing += len(sets) != 1
    rec.note(f"100 cases x 7 parallelisms, {differing} cases differ")
    assert differing == 0


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_criterion_3_end_to_end(seed, criterion):
    rec = criterion(3, f"256 embeddings, 2 deformed, seed {seed}: exactly the 254 well-formed found")
    spec, patterns = repeated_operation_scenario(count=256, deformed=2, seed=seed)
    trace, truth = generate(spec, patterns)
    good = [t.position for t in truth if t.well_formed]
    first = good[0]
    ops = locate_operations(trace, trace.samples[first:first + 2800])
    template = subsample_template(build_template(trace, ops, 2800), 4)
    it, report = calibrate(trace, ops, template, range(0, 1025, 16))
    run = run_engine(trace, it, EngineConfig(parallelism=32))
    found = [e.start_index for e in run.events]
    false_pos = sorted(set(found) - set(good))
    missed = sorted(set(good) - set(found))
    rec.note(f"{len(found)} events, {len(missed)} missed, {len(false_pos)} false positives "
             f"(offset {report.chosen_offset}, threshold {report.chosen_threshold}/{it.m})")
    assert len(found) == 254 and not missed and not false_pos


def test_criterion_4_resource_anchors(criterion):
    rec = criterion(4, "measured LUT counts exact, utilisation within 1 point, max length 1400 +- 5")
    table = [
        (700, "lut_based", 169_386, 34), (1400, "lut_based", 338_948, 68), (2800, "lut_based", 680_472, 137),
        (700, "carry_logic", 611_651, 123), (1400, "carry_logic", 1_222_969, 245),
        (2800, "carry_logic", 2_447_523, 492),
    ]
    worst = 0.0
    for m, style, luts, pct in table:
        est = estimate_luts(m, style, 32, KU85)
        assert est.luts == luts
        worst = max(worst, abs(est.utilization_percent - pct))
    limit = max_template_length(KU85, "lut_based", 32, 0.32)
    rec.note(f"6/6 exact, worst utilisation error {worst:.2f} points, max length {limit}")
    assert worst <= 1.0
    assert abs(limit - 1400) <= 5


def test_criterion_5_formula_anchors(criterion):
    rec = criterion(5, "excess samples and shift register length, 1000 random inputs")
    rng = np.random.default_rng(5)
    wrong = 0
    for _ in range(1000):
        l, d, b, n = (int(v) for v in rng.integers([0, 1, 0, 1], [64, 129, 5000, 100_000]))
        excess = sum(d for _ in range(l)) + b
        wrong += compute_excess_samples(l, d, b) != excess
        wrong += compute_srg_length(n, excess) != n + excess
        wrong += EngineConfig(parallelism=d, latency=l, positional_buffer=b).srg_length(n) != n + excess
    rec.note(f"1000 inputs, {wrong} mismatches")
    assert wrong == 0


def test_criterion_6_similarity_properties(criterion):
    rec = criterion(6, "offset monotonicity, Pearson invariance, SAD identity/symmetry, inclusive bounds")
    rng = np.random.default_rng(6)
    mono = 0
    for _ in range(1000):
        m = int(rng.integers(1, 200))
        c = rng.integers(-8192, 8192, m)
        t = np.clip(c + rng.integers(-300, 300, m), -8192, 8191)
        a, b = sorted(rng.integers(0, 400, 2).tolist())
        mono += interval_score(t, make_interval_template(Template(c), a)) > interval_score(
            t, make_interval_template(Template(c), b))
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(2, 300))
        t = rng.integers(-8192, 8192, n)
        c = rng.integers(-8192, 8192, n)
        if np.ptp(t) == 0 or np.ptp(c) == 0:
            continue
        alpha, beta = rng.uniform(0.01, 50), rng.uniform(-1e4, 1e4)
        delta = int(rng.integers(-5000, 5000))
        r = pearson_correlation(t, c)
        worst = max(worst, abs(pearson_correlation(t, alpha * c + beta) - r),
                    abs(pearson_correlation(t + delta, c + delta) - r))
    sad_bad = 0
    for _ in range(1000):
        n = int(rng.integers(1, 100))
        t = rng.integers(-8192, 8192, n)
        c = t.copy() if rng.random() < 0.3 else rng.integers(-8192, 8192, n)
        sad_bad += sad(t, c) != sad(c, t)
        sad_bad += (sad(t, c) == 0) != bool(np.array_equal(t, c))
        sad_bad += sad(t, t) != 0
    bounds_bad = 0
    for _ in range(1000):
        lo = int(rng.integers(-8192, 8000))
        hi = int(rng.integers(lo, 8192))
        bounds_bad += interval_indicator(lo, hi, lo) != 1
        bounds_bad += interval_indicator(hi, hi, lo) != 1
        bounds_bad += interval_indicator(lo - 1, hi, lo) != 0
        bounds_bad += interval_indicator(hi + 1, hi, lo) != 0
    rec.note(f"{mono} monotonicity violations, worst Pearson drift {worst:.1e}, "
             f"{sad_bad} SAD and {bounds_bad} boundary violations")
    assert mono == 0 and worst <= 1e-9 and sad_bad == 0 and bounds_bad == 0


def test_criterion_7_trigger_contract(oracle_runs, criterion):
    rec = criterion(7, "hold-off spacing, exact pulse widths, passthrough at constant delay")
    cases, _ = oracle_runs
    failing = [c["trigger_problems"] for c in cases if c["trigger_problems"]]
    rec.note(f"{len(cases)} cases, {len(failing)} with contract violations")
    assert not failing, failing[:3]


def test_criterion_8_throughput(criterion):
    rec = criterion(8, "batch_match >= 10 MS/s at m = 350; bench prints the figure")
    rng = np.random.default_rng(8)
    it = make_interval_template(Template(rng.integers(-2000, 2000, 350)), 300)
    x = rng.integers(-3000, 3000, 4_000_000).astype(np.int16)
    batch_match(x[:10_000], it)
    best = 0.0
    for _ in range(3):
        t0 = time.perf_counter()
        batch_match(x, it)
        best = max(best, x.size / (time.perf_counter() - t0))
    out = CliRunner().invoke(cli, ["bench", "--seed", "8", "--samples", "1000000", "--engine-samples", "20000"])
    rec.note(f"{best / 1e6:.1f} MS/s; bench: {out.stdout.splitlines()[0] if out.stdout else out.stderr}")
    assert out.exit_code == 0 and "samples/s" in out.stdout
    assert best >= 10e6
