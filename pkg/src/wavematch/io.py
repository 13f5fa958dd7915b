"""On-disk formats.

Trace file (``.wmtr``), little-endian::

    offset  size  field
    0       4     magic b"WMTR"
    4       2     format version (uint16, currently 1)
    6       1     precision p in bits (uint8)
    7       1     reserved, 0
    8       8     sample count (uint64)
    16      8     sample rate in Hz (float64)
    24      2*N   samples, int16

Templates and located operations are JSON documents; event logs are CSV with
the columns ``start_index,lane,score,trigger_index``.
"""

from __future__ import annotations

import csv
import json
import struct
from dataclasses import asdict
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .calibration import CalibrationReport, LocatedOperations
from .engine import MatchEvent
from .exceptions import (
    BadMagicError,
    TraceFormatError,
    TruncatedPayloadError,
    UnsupportedVersionError,
)
from .traces import IntervalTemplate, Template, Trace, as_samples

MAGIC = b"WMTR"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sHBBQd")
HEADER_SIZE = _HEADER.size

TEMPLATE_FORMAT = "wavematch-template"
OPS_FORMAT = "wavematch-operations"
EVENT_COLUMNS = ("start_index", "lane", "score", "trigger_index")


def save_trace(path: str | Path, trace: Trace) -> None:
    header = _HEADER.pack(MAGIC, FORMAT_VERSION, trace.precision, 0, len(trace), trace.sample_rate_hz)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(trace.samples.astype("<i2").tobytes())


def load_trace(path: str | Path) -> Trace:
    data = Path(path).read_bytes()
    if len(data) < HEADER_SIZE:
        raise TruncatedPayloadError(
            f"{path}: header truncated, expected {HEADER_SIZE} bytes, got {len(data)}"
        )
    magic, version, precision, _, count, rate = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise BadMagicError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if version != FORMAT_VERSION:
        raise UnsupportedVersionError(f"{path}: unsupported format version {version}")
    expected = 2 * count
    actual = len(data) - HEADER_SIZE
    if actual < expected:
        raise TruncatedPayloadError(
            f"{path}: truncated payload, expected {expected} bytes, got {actual}"
        )
    if actual > expected:
        raise TraceFormatError(f"{path}: {actual - expected} trailing bytes after {count} samples")
    raw = np.frombuffer(data, dtype="<i2", count=count, offset=HEADER_SIZE)
    samples = as_samples(raw, precision)
    return Trace(samples, rate, label=Path(path).stem, precision=precision)


class TemplateBundle(NamedTuple):
    template: Template
    interval: IntervalTemplate | None = None
    report: CalibrationReport | None = None


def save_template(path: str | Path, template: Template, interval: IntervalTemplate | None = None,
                  report: CalibrationReport | None = None) -> None:
    doc = {
        "format": TEMPLATE_FORMAT,
        "version": FORMAT_VERSION,
        "precision": template.precision,
        "stride": template.stride,
        "positional_buffer": template.positional_buffer,
        "samples": template.samples.tolist(),
    }
    if interval is not None:
        doc["calibration"] = {
            "offset": interval.offset,
            "threshold": interval.threshold,
            "source_stride": interval.source_stride,
            "upper": interval.upper.tolist(),
            "lower": interval.lower.tolist(),
            "report": asdict(report) if report is not None else None,
        }
    Path(path).write_text(json.dumps(doc) + "\n")


def load_template(path: str | Path) -> TemplateBundle:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise TraceFormatError(f"{path}: not a JSON template document ({exc})") from None
    if doc.get("format") != TEMPLATE_FORMAT:
        raise BadMagicError(f"{path}: not a template document")
    if doc.get("version") != FORMAT_VERSION:
        raise UnsupportedVersionError(f"{path}: unsupported template version {doc.get('version')}")
    precision = int(doc["precision"])
    template = Template(doc["samples"], doc["stride"], doc["positional_buffer"], precision)
    cal = doc.get("calibration")
    if not cal:
        return TemplateBundle(template)
    interval = IntervalTemplate(
        cal["upper"], cal["lower"], cal["threshold"], cal["source_stride"], precision, cal.get("offset")
    )
    report = CalibrationReport(**cal["report"]) if cal.get("report") else None
    return TemplateBundle(template, interval, report)


def save_operations(path: str | Path, ops: LocatedOperations) -> None:
    doc = {
        "format": OPS_FORMAT,
        "version": FORMAT_VERSION,
        "span": ops.span,
        "locations": list(ops.locations),
        "correlations": list(ops.correlations),
        "rejected": [{"index": i, "reason": r} for i, r in ops.rejected],
    }
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def load_operations(path: str | Path) -> LocatedOperations:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != OPS_FORMAT:
        raise BadMagicError(f"{path}: not a located-operations document")
    return LocatedOperations(
        tuple(doc["locations"]),
        int(doc["span"]),
        tuple((r["index"], r["reason"]) for r in doc.get("rejected", ())),
        tuple(doc.get("correlations", ())),
    )


def write_event_log(path: str | Path, events: list[MatchEvent]) -> None:
    rows = sorted(events, key=lambda e: e.start_index)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(EVENT_COLUMNS)
        for e in rows:
            w.writerow((e.start_index, e.lane, e.score, e.trigger_index))


def read_event_log(path: str | Path) -> list[MatchEvent]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != EVENT_COLUMNS:
            raise TraceFormatError(f"{path}: unexpected event log columns {reader.fieldnames}")
        return [MatchEvent(*(int(row[c]) for c in EVENT_COLUMNS)) for row in reader]


def write_plot_csv(path: str | Path, trace: Trace, events: list[MatchEvent] = (),
                   bucket: int = 1000) -> None:
    """Decimated min/max envelope of ``trace`` with event markers, for offline plotting."""
    x = trace.samples
    n_buckets = -(-len(x) // bucket) if len(x) else 0
    starts = sorted(e.start_index for e in events)
    marks = np.zeros(n_buckets, dtype=np.int64)
    for s in starts:
        marks[s // bucket] += 1
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("first_index", "min", "max", "events"))
        for b in range(n_buckets):
            seg = x[b * bucket:(b + 1) * bucket]
            w.writerow((b * bucket, int(seg.min()), int(seg.max()), int(marks[b])))
