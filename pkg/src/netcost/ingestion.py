"""Parsers for external evidence: Prometheus text scrapes, flow CSV, and a
minimal Kubecost allocation export (see docs/kubecost-schema.md)."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import re
from dataclasses import dataclass, field
from datetime import datetime

from .errors import (
    AddressError,
    InsufficientSamples,
    NegativeBytes,
    NonMonotonicTime,
    IrregularSampling,
    ParseError,
    SchemaError,
)
from .traffic import ClassTotals, FlowRecord, RateSeries, Trace, TrafficClass

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CounterSample:
    name: str
    labels: dict[str, str] = field(default_factory=dict)
    value: float = 0.0
    timestamp: float = 0.0

    def __post_init__(self):
        if not self.name:
            raise ValueError("metric name must be non-empty")
        if not self.value >= 0:
            raise ValueError(f"counter value must be >= 0, got {self.value}")

    @property
    def series_key(self) -> tuple:
        return (self.name, tuple(sorted(self.labels.items())))


# --- Prometheus text exposition format 0.0.4 ---------------------------------

_NAME = re.compile(r"[a-zA-Z_:][a-zA-Z0-9_:]*")
_LABEL_NAME = re.compile(r"[a-zA-Z_][a-zA-Z0-9_]*")
_ESCAPES = {"\\": "\\", '"': '"', "n": "\n"}


def _parse_labels(text: str, pos: int) -> tuple[dict[str, str], int]:
    """Parse ``{k="v",...}`` starting just after the opening brace."""
    labels: dict[str, str] = {}
    while True:
        while pos < len(text) and text[pos] in " \t":
            pos += 1
        if pos < len(text) and text[pos] == "}":
            return labels, pos + 1
        m = _LABEL_NAME.match(text, pos)
        if not m:
            raise ValueError(f"bad label name at column {pos + 1}")
        key = m.group(0)
        pos = m.end()
        while pos < len(text) and text[pos] in " \t":
            pos += 1
        if text[pos : pos + 2] != '="':
            raise ValueError(f"expected '=\"' after label {key!r}")
        pos += 2
        chars = []
        while True:
            if pos >= len(text):
                raise ValueError(f"unterminated value for label {key!r}")
            ch = text[pos]
            if ch == "\\":
                nxt = text[pos + 1 : pos + 2]
                if nxt not in _ESCAPES:
                    raise ValueError(f"bad escape sequence in label {key!r}")
                chars.append(_ESCAPES[nxt])
                pos += 2
            elif ch == '"':
                pos += 1
                break
            else:
                chars.append(ch)
                pos += 1
        if key in labels:
            raise ValueError(f"duplicate label {key!r}")
        labels[key] = "".join(chars)
        while pos < len(text) and text[pos] in " \t":
            pos += 1
        if pos < len(text) and text[pos] == ",":
            pos += 1
        elif pos < len(text) and text[pos] == "}":
            return labels, pos + 1
        else:
            raise ValueError("expected ',' or '}' in label set")


def _parse_value(token: str) -> float:
    lowered = token.lower()
    if lowered in ("+inf", "inf"):
        return math.inf
    if lowered == "-inf":
        return -math.inf
    if lowered == "nan":
        return math.nan
    return float(token)


def _parse_line(line: str, scrape_time: float | None) -> CounterSample:
    m = _NAME.match(line)
    if not m:
        raise ValueError("line does not start with a metric name")
    name, pos = m.group(0), m.end()
    labels: dict[str, str] = {}
    if pos < len(line) and line[pos] == "{":
        labels, pos = _parse_labels(line, pos + 1)
    rest = line[pos:].split()
    if not rest:
        raise ValueError("missing sample value")
    if len(rest) > 2:
        raise ValueError("trailing tokens after timestamp")
    value = _parse_value(rest[0])
    if math.isnan(value) or value < 0:
        raise ValueError(f"counter value must be >= 0, got {rest[0]}")
    if len(rest) == 2:
        ts = int(rest[1]) / 1000.0  # exposition timestamps are ms
    elif scrape_time is not None:
        ts = float(scrape_time)
    else:
        raise ValueError("no timestamp on sample and no scrape time supplied")
    return CounterSample(name, labels, value, ts)


def parse_prometheus_text(
    document: str,
    scrape_time: float | None = None,
    strict: bool = True,
) -> list[CounterSample]:
    """One :class:`CounterSample` per data line; ``#`` lines are skipped.

    Malformed lines raise :class:`ParseError` in strict mode and are logged
    and dropped otherwise.
    """
    samples = []
    for lineno, raw in enumerate(document.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            samples.append(_parse_line(line, scrape_time))
        except ValueError as exc:
            if strict:
                raise ParseError(str(exc), lineno) from exc
            log.warning("skipping line %d: %s", lineno, exc)
    return samples


def select_series(samples: list[CounterSample], name: str, **labels: str) -> list[CounterSample]:
    """Samples of one metric whose labels include ``labels``, ordered by time."""
    hits = [
        s
        for s in samples
        if s.name == name and all(s.labels.get(k) == v for k, v in labels.items())
    ]
    keys = {s.series_key for s in hits}
    if len(keys) > 1:
        raise ValueError(f"{len(keys)} series match {name}{labels}; narrow the label filter")
    return sorted(hits, key=lambda s: s.timestamp)


def counters_to_rates(samples: list[CounterSample], reset: str = "restart") -> RateSeries:
    """Per-interval rates from a cumulative counter.

    On a counter decrease, ``reset="restart"`` assumes the counter restarted
    from zero (delta = new value); ``reset="skip"`` books the interval as 0.
    Scrape intervals may jitter by at most 0.1% of their mean.
    """
    if reset not in ("restart", "skip"):
        raise ValueError(f"reset must be 'restart' or 'skip', got {reset!r}")
    if len(samples) < 2:
        raise InsufficientSamples(f"need at least 2 samples, got {len(samples)}")
    times = [s.timestamp for s in samples]
    for i, (a, b) in enumerate(zip(times, times[1:]), start=1):
        if not b > a:
            raise NonMonotonicTime(f"sample {i} at t={b} does not follow t={a}")
    width = (times[-1] - times[0]) / (len(times) - 1)
    for a, b in zip(times, times[1:]):
        if abs((b - a) - width) > 1e-3 * width:
            raise IrregularSampling(
                f"scrape interval {b - a} s deviates from mean {width} s; resample first"
            )
    rates = []
    for prev, cur in zip(samples, samples[1:]):
        if cur.value >= prev.value:
            delta = cur.value - prev.value
        else:
            delta = cur.value if reset == "restart" else 0.0
        rates.append(delta / (cur.timestamp - prev.timestamp))
    return RateSeries(width, tuple(times[:-1]), tuple(rates))


# --- flow CSV -----------------------------------------------------------------

FLOW_CSV_HEADER = ("timestamp", "src", "dst", "bytes")


def parse_flow_csv(document: str) -> Trace:
    reader = csv.reader(io.StringIO(document, newline=""))
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("missing header row", 1) from None
    if tuple(h.strip() for h in header) != FLOW_CSV_HEADER:
        raise ParseError(f"header must be {','.join(FLOW_CSV_HEADER)}", 1)
    records = []
    for row in reader:
        lineno = reader.line_num
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 4:
            raise ParseError(f"expected 4 columns, got {len(row)}", lineno)
        ts_s, src, dst, bytes_s = (c.strip() for c in row)
        try:
            ts = float(ts_s)
        except ValueError:
            raise ParseError(f"bad timestamp {ts_s!r}", lineno) from None
        if not math.isfinite(ts):
            raise ParseError(f"non-finite timestamp {ts_s!r}", lineno)
        try:
            nbytes = int(bytes_s)
        except ValueError:
            raise ParseError(f"bytes must be an integer, got {bytes_s!r}", lineno) from None
        if nbytes < 0:
            raise NegativeBytes(f"negative byte count {nbytes}", lineno)
        try:
            records.append(FlowRecord(ts, src, dst, nbytes))
        except AddressError as exc:
            raise ParseError(str(exc), lineno) from None
    return Trace(records)


def serialize_flow_csv(trace: Trace) -> str:
    """Write ``trace`` as flow CSV.

    The format has no window fields, so when the window reaches past the
    first or last record a zero-byte copy of that record is written at the
    window edge. Parsing then recovers the same window and byte totals.
    """
    rows = list(trace.records)
    if rows and rows[0].timestamp > trace.start:
        rows.insert(0, FlowRecord(trace.start, rows[0].src, rows[0].dst, 0))
    if rows and rows[-1].timestamp < trace.end:
        rows.append(FlowRecord(trace.end, rows[-1].src, rows[-1].dst, 0))
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(FLOW_CSV_HEADER)
    for r in rows:
        writer.writerow((repr(r.timestamp), str(r.src), str(r.dst), r.bytes))
    return buf.getvalue()


# --- Kubecost allocation subset -------------------------------------------------

KUBECOST_SCHEMA_VERSION = 1

KUBECOST_BYTE_FIELDS = {
    "networkInZoneBytes": TrafficClass.IN_ZONE,
    "networkCrossZoneBytes": TrafficClass.CROSS_ZONE,
    "networkCrossRegionBytes": TrafficClass.CROSS_REGION,
    "networkInternetEgressBytes": TrafficClass.INTERNET_EGRESS,
    "networkInternetIngressBytes": TrafficClass.INTERNET_INGRESS,
}


@dataclass(frozen=True)
class KubecostAllocation:
    totals: ClassTotals
    network_cost: float
    window_duration: float

    def __iter__(self):
        return iter((self.totals, self.network_cost, self.window_duration))


def _timestamp(value, field_name: str) -> float:
    if isinstance(value, bool):
        raise SchemaError(field_name, "expected a timestamp")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        try:
            return datetime.fromisoformat(value.replace("Z", "+00:00")).timestamp()
        except ValueError:
            pass
    raise SchemaError(field_name, "expected unix seconds or an ISO-8601 string")


def _require(doc: dict, key: str, path: str):
    if not isinstance(doc, dict) or key not in doc:
        raise SchemaError(f"{path}{key}")
    return doc[key]


def parse_kubecost_allocation(document: str) -> KubecostAllocation:
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", exc.lineno) from None
    if not isinstance(doc, dict):
        raise SchemaError("<root>", "expected a JSON object")
    version = _require(doc, "schemaVersion", "")
    if version != KUBECOST_SCHEMA_VERSION:
        raise SchemaError("schemaVersion", f"unsupported version {version!r}")
    window = _require(doc, "window", "")
    start = _timestamp(_require(window, "start", "window."), "window.start")
    end = _timestamp(_require(window, "end", "window."), "window.end")
    if not end > start:
        raise SchemaError("window.end", "window end must be after start")

    allocations = _require(doc, "allocations", "")
    if isinstance(allocations, dict):
        items = list(allocations.items())
    elif isinstance(allocations, list):
        items = [(str(i), a) for i, a in enumerate(allocations)]
    else:
        raise SchemaError("allocations", "expected a list or object")

    sums = {c: 0 for c in TrafficClass}
    cost = 0.0
    for key, alloc in items:
        path = f"allocations[{key}]."
        raw_cost = _require(alloc, "networkCost", path)
        if isinstance(raw_cost, bool) or not isinstance(raw_cost, (int, float)) or raw_cost < 0:
            raise SchemaError(f"{path}networkCost", "expected a non-negative number")
        cost += raw_cost
        for fname, cls in KUBECOST_BYTE_FIELDS.items():
            val = alloc.get(fname, 0)
            if isinstance(val, bool) or not isinstance(val, (int, float)) or val < 0 or val != int(val):
                raise SchemaError(f"{path}{fname}", "expected a non-negative integer")
            sums[cls] += int(val)
    return KubecostAllocation(ClassTotals(sums), cost, end - start)
