"""Traffic patterns, monthly extrapolation, cloud vs bare-metal comparison,
and break-even search."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Union

from .dimensioning import Dimensioning, DimensioningPolicy, dimension, required_capacity
from .errors import InvalidDuration, InvalidPattern, NonMonotone
from .pricing import (
    BYTES_PER_GB,
    CapacityPricing,
    CostBreakdown,
    LoadBalancerConfig,
    UsagePricing,
    bare_metal_monthly_cost,
    cloud_cost,
)
from .traffic import (
    ClassTotals,
    FlowRecord,
    Topology,
    Trace,
    TrafficClass,
    aggregate_trace,
    parse_address,
)

SECONDS_PER_MONTH = 2_592_000  # 30 days

# stand-in internet peer used when the topology tags no internet addresses
DEFAULT_INTERNET_PEER = "203.0.113.1"


def extrapolate_monthly(window_cost: float, window_duration: float, pattern_scale: float = 1.0) -> float:
    """Scale a measured window cost to a 30-day month.

    ``pattern_scale`` is the fraction of the month spent at the measured
    intensity (1.0 for constant usage).
    """
    if not window_duration > 0:
        raise InvalidDuration(f"window duration must be > 0, got {window_duration}")
    if not 0 <= pattern_scale <= 1:
        raise ValueError(f"pattern scale must be in [0, 1], got {pattern_scale}")
    return window_cost * (SECONDS_PER_MONTH / window_duration) * pattern_scale


# --- patterns ---------------------------------------------------------------


class LCG:
    """64-bit linear congruential generator (Knuth's MMIX constants).

    state <- (6364136223846793005 * state + 1442695040888963407) mod 2**64;
    uniform draws take the top 53 bits divided by 2**53. Fixed here so that
    a seed yields the same burst sequence in any implementation.
    """

    A = 6364136223846793005
    C = 1442695040888963407
    MASK = (1 << 64) - 1

    def __init__(self, seed: int):
        self.state = int(seed) & self.MASK

    def next_u64(self) -> int:
        self.state = (self.A * self.state + self.C) & self.MASK
        return self.state

    def random(self) -> float:
        return (self.next_u64() >> 11) / float(1 << 53)


def _check_rate(name: str, value: float):
    if not (value >= 0 and math.isfinite(value)):
        raise InvalidPattern(f"{name} must be a finite rate >= 0, got {value}")


@dataclass(frozen=True)
class Constant:
    rate: float

    def __post_init__(self):
        _check_rate("rate", self.rate)

    def bucket_bytes(self, duration: float, bucket: float) -> list[float]:
        return [self.rate * (b - a) for a, b in _bucket_edges(duration, bucket)]

    def mean_rate(self) -> float:
        return self.rate

    def peak_rate(self, window: float) -> float:
        return self.rate


@dataclass(frozen=True)
class DutyCycle:
    """Full ``rate`` for the leading ``active_fraction`` of the period, idle after."""

    rate: float
    active_fraction: float

    def __post_init__(self):
        _check_rate("rate", self.rate)
        if not 0 < self.active_fraction <= 1:
            raise InvalidPattern(f"active_fraction must be in (0, 1], got {self.active_fraction}")

    def bucket_bytes(self, duration: float, bucket: float) -> list[float]:
        cut = self.active_fraction * duration
        return [self.rate * max(0.0, min(b, cut) - a) for a, b in _bucket_edges(duration, bucket)]

    def mean_rate(self) -> float:
        return self.rate * self.active_fraction

    def peak_rate(self, window: float) -> float:
        # sized on the live period
        return self.rate


@dataclass(frozen=True)
class Diurnal:
    """``mean + amplitude * sin(2*pi*t/period)``."""

    mean: float
    amplitude: float
    period: float = 86_400.0

    def __post_init__(self):
        _check_rate("mean", self.mean)
        _check_rate("amplitude", self.amplitude)
        if self.amplitude > self.mean:
            raise InvalidPattern("amplitude must not exceed mean (rate would go negative)")
        if not self.period > 0:
            raise InvalidPattern(f"period must be > 0, got {self.period}")

    def _integral(self, t: float) -> float:
        w = 2 * math.pi / self.period
        return self.mean * t - self.amplitude * math.cos(w * t) / w

    def bucket_bytes(self, duration: float, bucket: float) -> list[float]:
        return [max(0.0, self._integral(b) - self._integral(a)) for a, b in _bucket_edges(duration, bucket)]

    def mean_rate(self) -> float:
        return self.mean

    def peak_rate(self, window: float) -> float:
        # best window mean of a sinusoid is centred on its crest
        x = math.pi * window / self.period
        factor = 1.0 if x == 0 else abs(math.sin(x)) / x
        return self.mean + self.amplitude * factor


@dataclass(frozen=True)
class Bursty:
    """Each bucket independently runs at ``burst_rate`` with ``burst_probability``."""

    baseline: float
    burst_rate: float
    burst_probability: float
    seed: int = 0

    def __post_init__(self):
        _check_rate("baseline", self.baseline)
        _check_rate("burst_rate", self.burst_rate)
        if not 0 <= self.burst_probability <= 1:
            raise InvalidPattern(
                f"burst_probability must be in [0, 1], got {self.burst_probability}"
            )

    def bucket_bytes(self, duration: float, bucket: float) -> list[float]:
        rng = LCG(self.seed)
        out = []
        for a, b in _bucket_edges(duration, bucket):
            rate = self.burst_rate if rng.random() < self.burst_probability else self.baseline
            out.append(rate * (b - a))
        return out

    def mean_rate(self) -> float:
        p = self.burst_probability
        return self.baseline * (1 - p) + self.burst_rate * p

    def peak_rate(self, window: float) -> float:
        if self.burst_probability > 0:
            return max(self.baseline, self.burst_rate)
        return self.baseline


TrafficPattern = Union[Constant, DutyCycle, Diurnal, Bursty]

PATTERN_KINDS: dict[str, type] = {
    "constant": Constant,
    "duty-cycle": DutyCycle,
    "diurnal": Diurnal,
    "bursty": Bursty,
}


def _bucket_edges(duration: float, bucket: float) -> list[tuple[float, float]]:
    n = math.ceil(duration / bucket - 1e-9)
    return [(i * bucket, min((i + 1) * bucket, duration)) for i in range(n)]


def _quantize(amounts: list[float]) -> list[int]:
    """Round a running total so the integer sum stays within 0.5 of the real sum."""
    out, acc, prev = [], 0.0, 0
    for x in amounts:
        acc += x
        cur = round(acc)
        out.append(cur - prev)
        prev = cur
    return out


def _endpoints(topology: Topology) -> tuple[str, str]:
    cluster = None
    preferred = [s for s in topology.subnets if s.region == topology.cluster_region] or list(
        topology.subnets
    )
    if not preferred:
        raise InvalidPattern("topology has no cluster subnets to generate traffic for")
    net = preferred[0].network
    cluster = net.network_address + (1 if net.num_addresses > 2 else 0)
    if topology.internet_addresses:
        peer = min(topology.internet_addresses)
    else:
        peer = parse_address(DEFAULT_INTERNET_PEER)
        if topology.resolve(peer) is not None:
            raise InvalidPattern("no internet address available; tag one in internet_ips")
    return str(cluster), str(peer)


def generate_trace(
    pattern: TrafficPattern,
    duration: float,
    bucket: float,
    topology: Topology,
    egress_share: float = 1.0,
    start: float = 0.0,
) -> Trace:
    """Synthesize a trace with one aggregated flow per bucket and direction.

    Zero-byte flows are omitted. Byte counts are integers whose running total
    tracks the pattern's integral to within half a byte.
    """
    if not bucket > 0 or not duration >= bucket:
        raise InvalidPattern(f"need duration >= bucket > 0, got duration={duration}, bucket={bucket}")
    if not 0 <= egress_share <= 1:
        raise InvalidPattern(f"egress_share must be in [0, 1], got {egress_share}")
    cluster, peer = _endpoints(topology)
    amounts = _quantize(pattern.bucket_bytes(duration, bucket))
    egress = _quantize([a * egress_share for a in amounts])
    records = []
    for i, (total, out) in enumerate(zip(amounts, egress)):
        ts = start + i * bucket
        if out:
            records.append(FlowRecord(ts, cluster, peer, out))
        if total - out:
            records.append(FlowRecord(ts, peer, cluster, total - out))
    return Trace(records, start, start + duration)


# --- comparison -------------------------------------------------------------


def cost_ratio(cloud_monthly: float, bare_metal_monthly: float) -> float | None:
    """cloud / bare-metal, or ``None`` when the bare-metal side is zero."""
    if bare_metal_monthly == 0:
        return None
    return cloud_monthly / bare_metal_monthly


@dataclass(frozen=True)
class ComparisonReport:
    totals: ClassTotals
    window_duration: float
    window_cost: CostBreakdown
    cloud_monthly: float
    bare_metal: Dimensioning
    per_class_monthly: dict[TrafficClass, float] = field(default_factory=dict)

    @property
    def bare_metal_monthly(self) -> float:
        return self.bare_metal.monthly_cost

    @property
    def ratio(self) -> float | None:
        return cost_ratio(self.cloud_monthly, self.bare_metal_monthly)


def compare(
    trace: Trace,
    topology: Topology,
    usage: UsagePricing,
    lb: LoadBalancerConfig | None,
    capacity: CapacityPricing,
    policy: DimensioningPolicy,
) -> ComparisonReport:
    totals = aggregate_trace(trace, topology)
    duration = trace.duration
    window = cloud_cost(totals, usage, lb, duration)
    monthly = extrapolate_monthly(window.total, duration, 1.0)
    per_class = {c: extrapolate_monthly(v, duration, 1.0) for c, v in window.per_class.items()}
    sized = dimension(trace, topology, policy, capacity)
    return ComparisonReport(totals, duration, window, monthly, sized, per_class)


# --- break-even -------------------------------------------------------------

SWEEPABLE = {
    "rate": ("rate", "mean", "baseline"),
    "active_fraction": ("active_fraction",),
    "egress_share": (),
    "burst_rate": ("burst_rate",),
    "burst_probability": ("burst_probability",),
    "amplitude": ("amplitude",),
}


@dataclass(frozen=True)
class PatternFamily:
    """A pattern template with one parameter left free."""

    template: TrafficPattern
    param: str
    egress_share: float = 1.0

    def __post_init__(self):
        if self.param not in SWEEPABLE:
            raise InvalidPattern(f"cannot sweep {self.param!r}; choose from {sorted(SWEEPABLE)}")
        if self.param != "egress_share" and self._field() is None:
            raise InvalidPattern(
                f"{type(self.template).__name__} has no parameter matching {self.param!r}"
            )

    def _field(self) -> str | None:
        names = type(self.template).__dataclass_fields__
        return next((f for f in SWEEPABLE[self.param] if f in names), None)

    def at(self, value: float) -> tuple[TrafficPattern, float]:
        if self.param == "egress_share":
            return self.template, value
        return replace(self.template, **{self._field(): value}), self.egress_share


@dataclass(frozen=True)
class MonthlyCostModel:
    """Closed-form monthly costs of a pattern under both pricing models."""

    usage: UsagePricing
    capacity: CapacityPricing
    policy: DimensioningPolicy = DimensioningPolicy()
    lb: LoadBalancerConfig | None = None

    def monthly_totals(self, pattern: TrafficPattern, egress_share: float) -> ClassTotals:
        month_bytes = pattern.mean_rate() * SECONDS_PER_MONTH
        out = round(month_bytes * egress_share)
        return ClassTotals(
            {
                TrafficClass.INTERNET_EGRESS: out,
                TrafficClass.INTERNET_INGRESS: round(month_bytes) - out,
            }
        )

    def cloud_monthly(self, pattern: TrafficPattern, egress_share: float = 1.0) -> float:
        totals = self.monthly_totals(pattern, egress_share)
        return cloud_cost(totals, self.usage, self.lb, SECONDS_PER_MONTH).total

    def bare_metal_monthly(self, pattern: TrafficPattern, egress_share: float = 1.0) -> float:
        peak = pattern.peak_rate(self.policy.peak_window)
        if self.policy.direction == "egress":
            peak *= egress_share
        return bare_metal_monthly_cost(required_capacity(8.0 * peak, self.policy), self.capacity)


@dataclass(frozen=True)
class NoCrossing:
    """Cost curves never cross in the swept range; ``cheaper`` names the winner."""

    cheaper: str  # "cloud" or "bare-metal"

    def __str__(self) -> str:
        return f"no crossing: {self.cheaper} is cheaper across the whole range"


@dataclass(frozen=True)
class BreakEven:
    value: float
    cloud_monthly: float
    bare_metal_monthly: float


def _sign(x: float) -> int:
    return (x > 0) - (x < 0)


def bisect_crossing(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    tolerance: float,
    xtol: float | None = None,
    prescan: int = 16,
    max_iter: int = 2000,
) -> float | NoCrossing:
    """Root of a monotone sign change of ``f`` (cloud minus bare metal) on [lo, hi].

    Stops once ``|f| <= tolerance``. A bracket narrower than ``xtol`` also
    stops the search; by default that only happens at float resolution,
    which is where a price step (a jump in ``f``) leaves it.
    """
    if not lo < hi:
        raise ValueError(f"need lo < hi, got ({lo}, {hi})")
    if not tolerance > 0:
        raise ValueError("tolerance must be > 0")
    xs = [lo + (hi - lo) * i / (prescan - 1) for i in range(prescan)]
    signs = [s for s in (_sign(f(x)) for x in xs) if s != 0]
    flips = sum(1 for a, b in zip(signs, signs[1:]) if a != b)
    if flips > 1:
        raise NonMonotone(f"cost difference changes sign {flips} times on [{lo}, {hi}]")

    f_lo, f_hi = f(lo), f(hi)
    if abs(f_lo) <= tolerance:
        return lo
    if abs(f_hi) <= tolerance:
        return hi
    if _sign(f_lo) == _sign(f_hi):
        if flips:
            raise NonMonotone("endpoint signs agree but interior samples disagree")
        return NoCrossing("bare-metal" if f_lo > 0 else "cloud")

    a, b, fa = lo, hi, f_lo
    for _ in range(max_iter):
        mid = 0.5 * (a + b)
        if not a < mid < b or (xtol is not None and b - a < xtol):
            return mid
        fm = f(mid)
        if abs(fm) <= tolerance:
            return mid
        if _sign(fm) == _sign(fa):
            a, fa = mid, fm
        else:
            b = mid
    return 0.5 * (a + b)


def break_even(
    family: PatternFamily,
    param_range: tuple[float, float],
    usage: UsagePricing,
    capacity: CapacityPricing,
    policy: DimensioningPolicy = DimensioningPolicy(),
    tolerance: float = 1e-6,
    lb: LoadBalancerConfig | None = None,
    xtol: float | None = None,
) -> BreakEven | NoCrossing:
    """Find where monthly cloud cost equals monthly bare-metal cost.

    ``tolerance`` bounds ``|cloud - bare|`` at the answer (currency units)
    unless the crossing sits on a capacity price step.
    """
    model = MonthlyCostModel(usage, capacity, policy, lb)

    def diff(p: float) -> float:
        pattern, share = family.at(p)
        return model.cloud_monthly(pattern, share) - model.bare_metal_monthly(pattern, share)

    lo, hi = param_range
    found = bisect_crossing(diff, lo, hi, tolerance, xtol)
    if isinstance(found, NoCrossing):
        return found
    pattern, share = family.at(found)
    return BreakEven(found, model.cloud_monthly(pattern, share), model.bare_metal_monthly(pattern, share))


def egress_rate_for_cost(window_cost: float, window_duration: float, usage: UsagePricing) -> float:
    """Constant egress rate (B/s) whose cloud cost over the window equals ``window_cost``.

    Lets a measured window cost drive the closed-form model when the class
    mix behind it is unknown.
    """
    if not window_duration > 0:
        raise InvalidDuration(f"window duration must be > 0, got {window_duration}")
    rate = usage.internet_egress
    if not rate:
        raise ValueError("usage pricing needs a positive internet_egress rate to anchor on cost")
    return window_cost / rate * BYTES_PER_GB / window_duration
