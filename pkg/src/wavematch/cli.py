"""Command-line workflow: synth, locate, build-template, calibrate, match, simulate.

Every command prints a one-line diagnostic on stderr and exits with a
class-specific code on failure:

====  ==========================================
code  meaning
====  ==========================================
0     success
1     internal error
2     usage error (bad or missing flag)
3     file missing or unreadable
4     malformed input file or sample out of range
5     calibration found no separating offset
6     design does not fit the device budget
7     invalid argument value
====  ==========================================

Option defaults can be overridden per command from a YAML file passed with
``--config``; flags given on the command line take precedence over it.
"""

from __future__ import annotations

import csv
import json
import sys
import time
from dataclasses import asdict
from pathlib import Path

import click
import numpy as np
import yaml

from . import __version__
from .calibration import (
    DEFAULT_BACKGROUND_STEP,
    DEFAULT_LOCATOR_THRESHOLD,
    DEFAULT_REJECT_FLOOR,
    build_template,
    calibrate as calibrate_template,
    locate_operations,
    subsample_template,
)
from .engine import EngineConfig, batch_events, batch_match, run_engine
from .exceptions import (
    CalibrationFailedError,
    InvalidArgumentError,
    ResourceBudgetError,
    TraceFormatError,
    WavematchError,
)
from .io import (
    load_operations,
    load_template,
    load_trace,
    save_operations,
    save_template,
    save_trace,
    write_event_log,
    write_plot_csv,
)
from .resources import KU85, estimate_luts, load_device_profiles, max_template_length
from .synth import NoiseSpec, SynthSpec, generate, repeated_operation_scenario
from .traces import Template, Trace, make_interval_template
from .validation import default_offsets

EXIT_INTERNAL = 1
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_FORMAT = 4
EXIT_CALIBRATION = 5
EXIT_RESOURCES = 6
EXIT_INVALID = 7

MAX_SYNTH_SAMPLES = 10_000_000


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, (TraceFormatError, yaml.YAMLError, json.JSONDecodeError, KeyError)):
        return EXIT_FORMAT
    if isinstance(exc, CalibrationFailedError):
        return EXIT_CALIBRATION
    if isinstance(exc, ResourceBudgetError):
        return EXIT_RESOURCES
    if isinstance(exc, (WavematchError, ValueError)):
        return EXIT_INVALID
    if isinstance(exc, OSError):
        return EXIT_IO
    return EXIT_INTERNAL


def _one_line(text: str) -> str:
    return "; ".join(part.strip() for part in str(text).splitlines() if part.strip())


class WorkflowGroup(click.Group):
    """Group that turns every failure into a single stderr line and an exit code."""

    def main(self, args=None, prog_name=None, complete_var=None, standalone_mode=True, **extra):
        try:
            rv = super().main(args, prog_name, complete_var, standalone_mode=False, **extra)
        except click.ClickException as exc:
            code = EXIT_USAGE if isinstance(exc, click.UsageError) else exc.exit_code
            if isinstance(exc, click.FileError):
                code = EXIT_IO
            self._fail(exc.format_message(), code)
        except click.Abort:
            self._fail("aborted", EXIT_INTERNAL)
        except KeyError as exc:
            self._fail(f"missing field {exc}", EXIT_FORMAT)
        except Exception as exc:  # noqa: BLE001 - mapped to an exit code
            code = exit_code_for(exc)
            msg = str(exc) or type(exc).__name__
            if code == EXIT_INTERNAL:
                msg = f"internal error: {type(exc).__name__}: {msg}"
            self._fail(msg, code)
        sys.exit(rv if isinstance(rv, int) else 0)

    @staticmethod
    def _fail(message: str, code: int):
        click.echo(f"wavematch: error: {_one_line(message)}", err=True)
        sys.exit(code)


def _load_config(ctx: click.Context, _param, value):
    if value is None:
        return None
    doc = yaml.safe_load(Path(value).read_text()) or {}
    if not isinstance(doc, dict) or not all(isinstance(v, dict) for v in doc.values()):
        raise TraceFormatError(f"{value}: config must map command names to option mappings")
    unknown = set(doc) - set(ctx.command.commands)
    if unknown:
        raise InvalidArgumentError(f"{value}: unknown command section(s) {sorted(unknown)}")
    ctx.default_map = {name: {k.replace("-", "_"): v for k, v in opts.items()} for name, opts in doc.items()}
    return value


def effective_defaults(group: click.Group, default_map: dict | None) -> dict:
    """Per-command option defaults after applying ``default_map``."""
    out = {}
    for name, cmd in sorted(group.commands.items()):
        ctx = click.Context(cmd, info_name=name, default_map=(default_map or {}).get(name))
        opts = {}
        for p in cmd.params:
            if not isinstance(p, click.Option) or p.name == "help":
                continue
            value = p.get_default(ctx)
            if value is not None and not isinstance(value, (bool, int, float, str, tuple, list)):
                value = None  # no default (click's unset sentinel)
            opts[p.name] = list(value) if isinstance(value, tuple) else value
        out[name] = opts
    return out


@click.group(cls=WorkflowGroup, invoke_without_command=True)
@click.version_option(__version__, prog_name="wavematch")
@click.option("--config", type=click.Path(dir_okay=False), callback=_load_config,
              is_eager=True, expose_value=False, help="YAML file of per-command option defaults.")
@click.option("--print-config", is_flag=True, help="Print every command's effective defaults and exit.")
@click.pass_context
def cli(ctx: click.Context, print_config: bool):
    """Interval-matching trigger toolkit."""
    if print_config:
        click.echo(yaml.safe_dump(effective_defaults(cli, ctx.default_map), sort_keys=True), nl=False)
        ctx.exit(0)
    if ctx.invoked_subcommand is None:
        click.echo(ctx.get_help())


def _existing(name: str, help_text: str):
    return click.option(name, type=click.Path(dir_okay=False), required=True, help=help_text)


def _parse_offsets(text: str | None) -> list[int] | None:
    """``"a:b"`` or ``"a:b:step"`` (inclusive of ``b``), or a comma-separated list."""
    if text is None:
        return None
    try:
        if ":" in text:
            parts = [int(v) for v in text.split(":")]
            if len(parts) not in (2, 3):
                raise ValueError
            lo, hi, step = (parts + [1])[:3]
            if step < 1 or hi < lo:
                raise ValueError
            return list(range(lo, hi + 1, step))
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise InvalidArgumentError(f"cannot parse offsets {text!r}; use a:b[:step] or a,b,c") from None


def _write_truth(path: str, truth) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("position", "pattern_id", "well_formed"))
        for t in truth:
            w.writerow((t.position, t.pattern_id, int(t.well_formed)))


def read_truth(path: str) -> list[tuple[int, str, bool]]:
    with open(path, newline="") as fh:
        return [(int(r["position"]), r["pattern_id"], r["well_formed"] == "1") for r in csv.DictReader(fh)]


def _report_lines(report) -> str:
    return "\n".join(f"{k}: {v}" for k, v in asdict(report).items())


@cli.command()
@click.option("--seed", type=int, required=True, help="Seed for every random draw.")
@click.option("--out", type=click.Path(dir_okay=False), required=True, help="Trace file to write.")
@click.option("--truth", type=click.Path(dir_okay=False), help="CSV of embedded positions.")
@click.option("--pattern-out", type=click.Path(dir_okay=False), help="Template file of the embedded pattern.")
@click.option("--spec-in", type=click.Path(dir_okay=False),
              help="Render a saved scenario document instead of the built-in scenario.")
@click.option("--spec-out", type=click.Path(dir_okay=False), help="Save the scenario document.")
@click.option("--count", default=256, show_default=True)
@click.option("--deformed", default=2, show_default=True)
@click.option("--pattern-length", default=2800, show_default=True)
@click.option("--gap", default=1200, show_default=True)
@click.option("--jitter", default=100, show_default=True)
@click.option("--noise-kind", type=click.Choice(["gaussian", "uniform"]), default="gaussian", show_default=True)
@click.option("--noise", default=300, show_default=True, help="Background noise amplitude.")
@click.option("--op-noise", default=60, show_default=True, help="Noise added on top of each operation.")
@click.option("--deform-fraction", default=0.4, show_default=True)
@click.option("--amplitude", default=3000, show_default=True)
@click.option("--max-samples", default=MAX_SYNTH_SAMPLES, show_default=True)
def synth(seed, out, truth, pattern_out, spec_in, spec_out, count, deformed, pattern_length, gap,
          jitter, noise_kind, noise, op_noise, deform_fraction, amplitude, max_samples):
    """Render a synthetic recording with known operation positions."""
    if spec_in:
        doc = json.loads(Path(spec_in).read_text())
        spec = SynthSpec.from_dict({**doc, "seed": seed})
        patterns = {k: Template(v) for k, v in doc.get("patterns", {}).items()}
    else:
        spec, patterns = repeated_operation_scenario(
            count=count, deformed=deformed, pattern_length=pattern_length, gap=gap, jitter=jitter,
            seed=seed, background=NoiseSpec(noise_kind, noise), operation_noise=op_noise,
            deform_fraction=deform_fraction, amplitude=amplitude,
        )
    if spec.length > max_samples:
        raise InvalidArgumentError(f"scenario needs {spec.length} samples, above --max-samples {max_samples}")
    trace, gt = generate(spec, patterns)
    save_trace(out, trace)
    if truth:
        _write_truth(truth, gt)
    if spec_out:
        doc = {**spec.to_dict(), "patterns": {k: p.samples.tolist() for k, p in patterns.items()}}
        Path(spec_out).write_text(json.dumps(doc) + "\n")
    if pattern_out:
        (pattern,) = patterns.values() if len(patterns) == 1 else (patterns["op"],)
        save_template(pattern_out, pattern)
    good = sum(t.well_formed for t in gt)
    click.echo(f"wrote {len(trace)} samples with {len(gt)} embeddings ({good} well-formed) to {out}")


@cli.command()
@_existing("--recording", "Recording trace file.")
@click.option("--seed-start", type=int, required=True, help="Start index of one known operation.")
@click.option("--seed-length", type=int, required=True, help="Length of the seed segment.")
@click.option("--expected-count", type=int, help="Fail unless exactly this many operations are found.")
@click.option("--threshold", default=DEFAULT_LOCATOR_THRESHOLD, show_default=True)
@click.option("--coarse-step", default=4, show_default=True)
@click.option("--reject-floor", default=DEFAULT_REJECT_FLOOR, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True, help="Operations document to write.")
def locate(recording, seed_start, seed_length, expected_count, threshold, coarse_step, reject_floor, out):
    """Find repeated operations by correlating against a seed segment."""
    trace = load_trace(recording)
    if seed_length < 2 or seed_start < 0 or seed_start + seed_length > len(trace):
        raise InvalidArgumentError("seed segment must lie inside the recording and hold >= 2 samples")
    seed = trace.samples[seed_start:seed_start + seed_length]
    ops = locate_operations(trace, seed, expected_count, threshold=threshold,
                            coarse_step=coarse_step, reject_floor=reject_floor)
    save_operations(out, ops)
    click.echo(f"located {len(ops)} operations (span {ops.span}), rejected {len(ops.rejected)}")
    for idx, reason in ops.rejected:
        click.echo(f"  rejected {idx}: {reason}")


@cli.command("build-template")
@_existing("--recording", "Recording trace file.")
@_existing("--ops", "Operations document from `locate`.")
@click.option("--length", type=int, help="Template length in samples [default: located span].")
@click.option("--stride", default=1, show_default=True, help="Keep every stride-th sample.")
@click.option("--positional-buffer", default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
def build_template_cmd(recording, ops, length, stride, positional_buffer, out):
    """Average the located operations into a template."""
    trace = load_trace(recording)
    located = load_operations(ops)
    template = build_template(trace, located, length or located.span, positional_buffer=positional_buffer)
    template = subsample_template(template, stride)
    save_template(out, template)
    click.echo(f"template of {len(template)} samples, stride {template.stride}, "
               f"{template.compared_positions} compared positions")


@cli.command()
@_existing("--recording", "Recording trace file.")
@_existing("--ops", "Operations document from `locate`.")
@_existing("--template", "Template file from `build-template`.")
@click.option("--offsets", help="Offsets to sweep, a:b[:step] or a,b,c [default: 65 steps up to half the template range].")
@click.option("--background-step", default=DEFAULT_BACKGROUND_STEP, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True, help="Calibrated template file.")
def calibrate(recording, ops, template, offsets, background_step, out):
    """Sweep offsets and pick the corridor and threshold with the widest margin."""
    trace = load_trace(recording)
    located = load_operations(ops)
    bundle = load_template(template)
    sweep = _parse_offsets(offsets) or default_offsets(bundle.template.samples)
    try:
        interval, report = calibrate_template(trace, located, bundle.template, sweep,
                                              background_step=background_step)
    except CalibrationFailedError as exc:
        if exc.report is not None:
            click.echo(_report_lines(exc.report))
        raise
    save_template(out, bundle.template, interval, report)
    click.echo(_report_lines(report))


def _calibrated(path: str):
    bundle = load_template(path)
    if bundle.interval is None:
        raise TraceFormatError(f"{path}: template is not calibrated; run `calibrate` first")
    return bundle


def _engine_options(fn):
    for opt in reversed((
        _existing("--recording", "Trace file to scan."),
        _existing("--template", "Calibrated template file."),
        click.option("--events-out", type=click.Path(dir_okay=False), required=True, help="Event log CSV."),
        click.option("--parallelism", default=32, show_default=True, help="Samples per clock cycle."),
        click.option("--holdoff", type=int, help="Minimum spacing of events [default: template span]."),
        click.option("--duration", type=int, help="Trigger pulse width [default: min(span, holdoff)]."),
        click.option("--plot-csv", type=click.Path(dir_okay=False), help="Decimated trace plus event markers."),
        click.option("--plot-bucket", default=1000, show_default=True),
    )):
        fn = opt(fn)
    return fn


def _config(bundle, parallelism, holdoff, duration, **extra) -> EngineConfig:
    return EngineConfig(parallelism=parallelism, precision=bundle.template.precision,
                        positional_buffer=bundle.template.positional_buffer,
                        holdoff_samples=holdoff, trigger_duration_samples=duration, **extra)


@cli.command()
@_engine_options
def match(recording, template, events_out, parallelism, holdoff, duration, plot_csv, plot_bucket):
    """Scan a trace with the compiled batch matcher."""
    bundle = _calibrated(template)
    trace = load_trace(recording)
    config = _config(bundle, parallelism, holdoff, duration)
    t0 = time.perf_counter()
    events = batch_events(trace, bundle.interval, config)
    elapsed = time.perf_counter() - t0
    write_event_log(events_out, events)
    if plot_csv:
        write_plot_csv(plot_csv, trace, events, plot_bucket)
    rate = len(trace) / elapsed if elapsed > 0 else float("inf")
    click.echo(f"{len(events)} events in {len(trace)} samples ({rate:,.0f} samples/s)")


@cli.command()
@_engine_options
@click.option("--latency", default=4, show_default=True, help="Pipeline depth in cycles.")
@click.option("--idle-value", default=0, show_default=True, help="Fill for the final partial cycle.")
@click.option("--trigger-out", type=click.Path(dir_okay=False), help="Trigger waveform as a 0/1 trace file.")
def simulate(recording, template, events_out, parallelism, holdoff, duration, plot_csv, plot_bucket,
             latency, idle_value, trigger_out):
    """Run the cycle-accurate engine over a trace."""
    bundle = _calibrated(template)
    trace = load_trace(recording)
    config = _config(bundle, parallelism, holdoff, duration, latency=latency, idle_value=idle_value)
    t0 = time.perf_counter()
    run = run_engine(trace, bundle.interval, config)
    elapsed = time.perf_counter() - t0
    write_event_log(events_out, run.events)
    if trigger_out:
        save_trace(trigger_out, Trace(run.trigger.astype(np.int16), trace.sample_rate_hz,
                                      label="trigger", precision=trace.precision))
    if plot_csv:
        write_plot_csv(plot_csv, trace, run.events, plot_bucket)
    click.echo(f"{len(run.events)} events; {run.cycles} cycles simulated in {elapsed:.2f} s; "
               f"output delay {run.output_delay} samples; shift register {run.srg_length} samples")


@cli.command("estimate-resources")
@click.option("--samples", type=int, required=True, help="Compared template positions.")
@click.option("--adder", type=click.Choice(["lut", "carry", "lut_based", "carry_logic"]), default="lut",
              show_default=True)
@click.option("--parallelism", default=32, show_default=True)
@click.option("--device", default=KU85.name, show_default=True)
@click.option("--devices-file", type=click.Path(dir_okay=False), help="YAML device profiles.")
@click.option("--reserve", default=0.0, show_default=True, help="Fraction of LUTs kept free.")
@click.option("--require-fit", is_flag=True, help="Exit with code 6 if the design exceeds the budget.")
def estimate_resources(samples, adder, parallelism, device, devices_file, reserve, require_fit):
    """Predict the LUT footprint of a matcher."""
    profiles = load_device_profiles(devices_file) if devices_file else {KU85.name: KU85}
    if device not in profiles:
        raise InvalidArgumentError(f"unknown device {device!r}; known: {', '.join(sorted(profiles))}")
    prof = profiles[device]
    est = estimate_luts(samples, adder, parallelism, prof)
    limit = max_template_length(prof, adder, parallelism, reserve)
    click.echo(f"{est.luts:,} LUTs, {est.utilization_percent:.0f}% of {prof.name} "
               f"({est.adder_style} adder, d={parallelism})")
    click.echo(f"max template length at {reserve:.0%} reserve: {limit}")
    if require_fit and est.luts > (1.0 - reserve) * prof.lut_capacity:
        raise ResourceBudgetError(
            f"{est.luts:,} LUTs exceed {1.0 - reserve:.0%} of {prof.name} ({prof.lut_capacity:,} LUTs)"
        )


@cli.command()
@click.option("--seed", type=int, required=True)
@click.option("--samples", default=4_000_000, show_default=True, help="Stream length for batch_match.")
@click.option("--positions", default=350, show_default=True, help="Compared template positions.")
@click.option("--stride", default=1, show_default=True)
@click.option("--engine-samples", default=100_000, show_default=True, help="Stream length for the engine.")
@click.option("--parallelism", default=32, show_default=True)
def bench(seed, samples, positions, stride, engine_samples, parallelism):
    """Measure batch matcher throughput and engine simulation speed."""
    if samples < 1 or positions < 1 or engine_samples < 0:
        raise InvalidArgumentError("--samples and --positions must be >= 1")
    rng = np.random.default_rng(seed)
    template = Template(rng.integers(-2000, 2001, positions), stride=stride)
    interval = make_interval_template(template, 300)
    stream = rng.integers(-3000, 3001, samples).astype(np.int16)
    batch_match(stream[: 4 * interval.span], interval)  # compile outside the timed region
    t0 = time.perf_counter()
    batch_match(stream, interval)
    elapsed = time.perf_counter() - t0
    click.echo(f"batch_match: {samples:,} samples, m={positions}, stride {stride}: "
               f"{samples / elapsed:,.0f} samples/s")
    if engine_samples:
        config = EngineConfig(parallelism=parallelism)
        run_engine(stream[: 4 * interval.span], interval, config)
        t0 = time.perf_counter()
        run = run_engine(stream[:engine_samples], interval, config)
        elapsed = time.perf_counter() - t0
        click.echo(f"engine: {run.cycles:,} cycles simulated (d={parallelism}) in {elapsed:.2f} s: "
                   f"{run.cycles / elapsed:,.0f} cycles/s, {engine_samples / elapsed:,.0f} samples/s")


def main():  # pragma: no cover - console entry point
    cli(prog_name="wavematch")
