"""Topology, flow records, and traffic classification.

Every flow is placed in exactly one billing class by resolving both
endpoints against the topology's subnet table (longest-prefix match).
Addresses that match no cluster subnet are treated as internet.
"""

from __future__ import annotations

import ipaddress
import math
from collections.abc import Iterable, Iterator, Mapping
from dataclasses import dataclass, field
from enum import Enum
from ipaddress import IPv4Address, IPv4Network

from .errors import AddressError, EmptyTrace, InvalidBucket, InvalidTopology


class TrafficClass(str, Enum):
    IN_ZONE = "in_zone"
    CROSS_ZONE = "cross_zone"
    CROSS_REGION = "cross_region"
    INTERNET_EGRESS = "internet_egress"
    INTERNET_INGRESS = "internet_ingress"

    @property
    def is_internet(self) -> bool:
        return self in (TrafficClass.INTERNET_EGRESS, TrafficClass.INTERNET_INGRESS)


def parse_address(value: str | IPv4Address) -> IPv4Address:
    if isinstance(value, IPv4Address):
        return value
    try:
        return IPv4Address(str(value).strip())
    except ValueError as exc:
        raise AddressError(f"not an IPv4 address: {value!r}") from exc


@dataclass(frozen=True)
class Subnet:
    network: IPv4Network
    zone: str
    region: str

    @classmethod
    def from_cidr(cls, cidr: str, zone: str, region: str) -> Subnet:
        try:
            network = ipaddress.IPv4Network(cidr, strict=True)
        except ValueError as exc:
            raise InvalidTopology(f"bad subnet prefix {cidr!r}: {exc}") from exc
        return cls(network, str(zone), str(region))


@dataclass(frozen=True)
class Topology:
    """Subnet-to-zone/region map plus explicitly internet-tagged addresses.

    Construction validates the invariants: one region per zone, no duplicate
    prefixes, and no internet-tagged address inside a cluster subnet.
    """

    subnets: tuple[Subnet, ...]
    internet_addresses: frozenset[IPv4Address] = frozenset()
    cluster_region: str | None = None
    _index: tuple = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "subnets", tuple(self.subnets))
        object.__setattr__(
            self,
            "internet_addresses",
            frozenset(parse_address(a) for a in self.internet_addresses),
        )
        zone_region: dict[str, str] = {}
        index: dict[int, dict[int, Subnet]] = {}
        for sn in self.subnets:
            known = zone_region.setdefault(sn.zone, sn.region)
            if known != sn.region:
                raise InvalidTopology(
                    f"zone {sn.zone!r} mapped to regions {known!r} and {sn.region!r}"
                )
            by_len = index.setdefault(sn.network.prefixlen, {})
            key = int(sn.network.network_address)
            if key in by_len:
                raise InvalidTopology(f"duplicate subnet prefix {sn.network}")
            by_len[key] = sn
        lookup = tuple(
            ((0xFFFFFFFF << (32 - plen)) & 0xFFFFFFFF if plen else 0, index[plen])
            for plen in sorted(index, reverse=True)
        )
        object.__setattr__(self, "_index", lookup)
        for addr in self.internet_addresses:
            hit = self.resolve(addr)
            if hit is not None:
                raise InvalidTopology(
                    f"internet address {addr} lies inside cluster subnet {hit.network}"
                )

    @classmethod
    def from_dict(cls, doc: Mapping) -> Topology:
        """Build from the config-document shape
        ``{subnets: [{cidr, zone, region}], internet_ips: [...], cluster_region}``."""
        try:
            subnets = [
                Subnet.from_cidr(s["cidr"], s["zone"], s["region"])
                for s in doc.get("subnets", [])
            ]
        except KeyError as exc:
            raise InvalidTopology(f"subnet entry missing key {exc.args[0]!r}") from exc
        except TypeError as exc:
            raise InvalidTopology("subnets must be a list of tables") from exc
        return cls(
            tuple(subnets),
            frozenset(doc.get("internet_ips", [])),
            doc.get("cluster_region"),
        )

    def to_dict(self) -> dict:
        doc: dict = {
            "subnets": [
                {"cidr": str(s.network), "zone": s.zone, "region": s.region}
                for s in self.subnets
            ],
            "internet_ips": sorted(str(a) for a in self.internet_addresses),
        }
        if self.cluster_region is not None:
            doc["cluster_region"] = self.cluster_region
        return doc

    def resolve(self, address: str | IPv4Address) -> Subnet | None:
        """Longest-prefix match; ``None`` means the address is on the internet."""
        value = int(parse_address(address))
        for mask, table in self._index:
            hit = table.get(value & mask)
            if hit is not None:
                return hit
        return None

    @property
    def zones(self) -> dict[str, str]:
        return {s.zone: s.region for s in self.subnets}


@dataclass(frozen=True)
class FlowRecord:
    timestamp: float
    src: IPv4Address
    dst: IPv4Address
    bytes: int

    def __post_init__(self):
        object.__setattr__(self, "src", parse_address(self.src))
        object.__setattr__(self, "dst", parse_address(self.dst))
        ts = float(self.timestamp)
        if not math.isfinite(ts):
            raise ValueError(f"non-finite timestamp {self.timestamp!r}")
        object.__setattr__(self, "timestamp", ts)
        if isinstance(self.bytes, bool) or int(self.bytes) != self.bytes:
            raise ValueError(f"bytes must be an integer, got {self.bytes!r}")
        object.__setattr__(self, "bytes", int(self.bytes))
        if self.bytes < 0:
            raise ValueError(f"negative byte count {self.bytes}")


class Trace:
    """Time-ordered flow records observed over ``[start, end]``.

    An empty trace may have no defined window; asking for ``start``/``end``
    then raises :class:`EmptyTrace`.
    """

    __slots__ = ("records", "_start", "_end")

    def __init__(
        self,
        records: Iterable[FlowRecord] = (),
        start: float | None = None,
        end: float | None = None,
    ):
        recs = tuple(sorted(records, key=lambda r: r.timestamp))
        if recs:
            if start is None:
                start = recs[0].timestamp
            if end is None:
                end = recs[-1].timestamp
        if (start is None) != (end is None):
            raise ValueError("start and end must both be given or both omitted")
        if start is not None:
            start, end = float(start), float(end)
            if end < start:
                raise ValueError(f"trace end {end} precedes start {start}")
            if recs and (recs[0].timestamp < start or recs[-1].timestamp > end):
                raise ValueError("record timestamps fall outside [start, end]")
        self.records = recs
        self._start = start
        self._end = end

    @property
    def start(self) -> float:
        if self._start is None:
            raise EmptyTrace("trace has no records and no explicit window")
        return self._start

    @property
    def end(self) -> float:
        if self._end is None:
            raise EmptyTrace("trace has no records and no explicit window")
        return self._end

    @property
    def has_window(self) -> bool:
        return self._start is not None

    @property
    def duration(self) -> float:
        return self.end - self.start

    @property
    def total_bytes(self) -> int:
        return sum(r.bytes for r in self.records)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[FlowRecord]:
        return iter(self.records)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Trace):
            return NotImplemented
        return (self.records, self._start, self._end) == (
            other.records,
            other._start,
            other._end,
        )

    def __repr__(self) -> str:
        return f"Trace({len(self.records)} records, start={self._start}, end={self._end})"

    def filter(self, keep) -> Trace:
        """Sub-trace of records where ``keep(record)`` is true, same window."""
        return Trace([r for r in self.records if keep(r)], self._start, self._end)


class ClassTotals(Mapping):
    """Integer byte totals per traffic class; missing classes read as 0."""

    __slots__ = ("_bytes",)

    def __init__(self, values: Mapping[TrafficClass, int] | None = None):
        data = {c: 0 for c in TrafficClass}
        for key, val in (values or {}).items():
            cls = TrafficClass(key)
            if int(val) != val or val < 0:
                raise ValueError(f"class total for {cls.value} must be a non-negative integer")
            data[cls] = int(val)
        self._bytes = data

    def __getitem__(self, key) -> int:
        return self._bytes[TrafficClass(key)]

    def __iter__(self):
        return iter(TrafficClass)

    def __len__(self) -> int:
        return len(TrafficClass)

    def __add__(self, other: ClassTotals) -> ClassTotals:
        return ClassTotals({c: self[c] + other[c] for c in TrafficClass})

    def __repr__(self) -> str:
        inner = ", ".join(f"{c.value}={v}" for c, v in self._bytes.items())
        return f"ClassTotals({inner})"

    @property
    def total(self) -> int:
        return sum(self._bytes.values())

    @property
    def internet_bytes(self) -> int:
        return self[TrafficClass.INTERNET_EGRESS] + self[TrafficClass.INTERNET_INGRESS]

    def shares(self) -> dict[TrafficClass, float]:
        tot = self.total
        return {c: (v / tot if tot else 0.0) for c, v in self._bytes.items()}


@dataclass(frozen=True)
class RateSeries:
    """Per-bucket transfer rates in bytes/s.

    ``bucket_bytes`` carries the exact integer byte count per bucket when the
    series was built from a trace; it is ``None`` for counter-derived series.
    """

    bucket_width: float
    starts: tuple[float, ...]
    rates: tuple[float, ...]
    bucket_bytes: tuple[int, ...] | None = None

    def __post_init__(self):
        if not self.bucket_width > 0:
            raise InvalidBucket(f"bucket width must be positive, got {self.bucket_width}")
        if len(self.starts) != len(self.rates):
            raise ValueError("starts and rates differ in length")
        if any(r < 0 for r in self.rates):
            raise ValueError("rates must be non-negative")
        tol = 1e-3 * self.bucket_width
        for a, b in zip(self.starts, self.starts[1:]):
            if not b > a or abs((b - a) - self.bucket_width) > tol:
                raise ValueError("bucket starts must increase by bucket_width")

    @property
    def samples(self) -> list[tuple[float, float]]:
        return list(zip(self.starts, self.rates))

    def __len__(self) -> int:
        return len(self.rates)

    @property
    def mean_rate(self) -> float:
        return math.fsum(self.rates) / len(self.rates) if self.rates else 0.0


def classify_flow(flow: FlowRecord, topology: Topology) -> TrafficClass:
    src = topology.resolve(flow.src)
    dst = topology.resolve(flow.dst)
    if src is None and dst is None:
        raise InvalidTopology(
            f"flow {flow.src} -> {flow.dst} has both endpoints on the internet"
        )
    if dst is None:
        return TrafficClass.INTERNET_EGRESS
    if src is None:
        return TrafficClass.INTERNET_INGRESS
    if src.zone == dst.zone:
        return TrafficClass.IN_ZONE
    if src.region == dst.region:
        return TrafficClass.CROSS_ZONE
    return TrafficClass.CROSS_REGION


def aggregate_trace(trace: Trace | Iterable[FlowRecord], topology: Topology) -> ClassTotals:
    sums = {c: 0 for c in TrafficClass}
    for i, rec in enumerate(trace):
        try:
            cls = classify_flow(rec, topology)
        except InvalidTopology as exc:
            raise InvalidTopology(f"record {i}: {exc}") from exc
        sums[cls] += rec.bytes
    return ClassTotals(sums)


def rate_series(trace: Trace, bucket_width: float) -> RateSeries:
    """Bucket the trace's bytes over its window and divide by the width.

    Buckets cover ``[start, end)``; one extra bucket is added when a record
    carrying bytes sits exactly on ``end`` (zero-byte window markers don't
    count, so they never dilute the series).
    """
    if not bucket_width > 0:
        raise InvalidBucket(f"bucket width must be positive, got {bucket_width}")
    if not trace.has_window:
        return RateSeries(bucket_width, (), (), ())
    start, end = trace.start, trace.end
    n = math.ceil((end - start) / bucket_width)
    last = next((r.timestamp for r in reversed(trace.records) if r.bytes), None)
    if last is not None:
        n = max(n, int((last - start) // bucket_width) + 1)
    counts = [0] * n
    for rec in trace.records:
        if not rec.bytes:
            continue
        counts[int((rec.timestamp - start) // bucket_width)] += rec.bytes
    starts = tuple(start + i * bucket_width for i in range(n))
    rates = tuple(c / bucket_width for c in counts)
    return RateSeries(bucket_width, starts, rates, tuple(counts))
