"""Bare-metal link sizing from observed or simulated traffic."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, EmptySeries
from .pricing import CapacityPricing, bare_metal_monthly_cost
from .traffic import RateSeries, Topology, Trace, TrafficClass, classify_flow, rate_series

DIRECTIONS = ("egress", "all")


@dataclass(frozen=True)
class DimensioningPolicy:
    utilization_target: float = 0.5
    peak_window: float = 60.0
    direction: str = "egress"
    bucket_width: float = 1.0

    def __post_init__(self):
        if not 0 < self.utilization_target <= 1:
            raise ConfigError(
                f"utilization target must be in (0, 1], got {self.utilization_target}"
            )
        if not self.peak_window > 0:
            raise ConfigError(f"peak window must be > 0, got {self.peak_window}")
        if not self.bucket_width > 0:
            raise ConfigError(f"bucket width must be > 0, got {self.bucket_width}")
        if self.direction not in DIRECTIONS:
            raise ConfigError(f"direction must be one of {DIRECTIONS}, got {self.direction!r}")


@dataclass(frozen=True)
class Dimensioning:
    peak_rate: float  # bits/s
    capacity: float  # bits/s
    monthly_cost: float

    def __iter__(self):
        # unpacks as (capacity, monthly_cost)
        return iter((self.capacity, self.monthly_cost))


def window_buckets(window: float, bucket_width: float) -> int:
    k = int(round(window / bucket_width))
    # round() absorbs float noise like 60 / 0.1; anything genuinely below one bucket is an error
    if k < 1 or window < bucket_width * (1 - 1e-9):
        raise ValueError(f"window {window} s is narrower than bucket width {bucket_width} s")
    return k


def peak_rate(series: RateSeries, window: float) -> float:
    """Highest mean rate over any aligned window of ``window`` seconds, in bits/s.

    Windows slide one bucket at a time. A window longer than the series is
    clamped to the whole series.
    """
    if len(series) == 0:
        raise EmptySeries("cannot take the peak of an empty rate series")
    k = min(window_buckets(window, series.bucket_width), len(series))
    if series.bucket_bytes is not None:
        # integer sums keep window totals exact
        csum = np.concatenate(([0], np.cumsum(np.asarray(series.bucket_bytes, dtype=object))))
        best = max(csum[k:] - csum[:-k])
        return 8.0 * float(best) / (k * series.bucket_width)
    rates = np.asarray(series.rates, dtype=float)
    csum = np.concatenate(([0.0], np.cumsum(rates)))
    return 8.0 * float(np.max(csum[k:] - csum[:-k])) / k


def required_capacity(peak: float, policy: DimensioningPolicy) -> float:
    if peak < 0:
        raise ValueError(f"peak rate must be >= 0, got {peak}")
    return peak / policy.utilization_target


def link_traffic(trace: Trace, topology: Topology, direction: str = "egress") -> Trace:
    """Records that load the uplink being sized.

    ``egress`` keeps internet egress plus cross-region flows leaving the
    cluster region; ``all`` keeps every record.
    """
    if direction == "all":
        return trace

    def leaves(rec) -> bool:
        cls = classify_flow(rec, topology)
        if cls is TrafficClass.INTERNET_EGRESS:
            return True
        if cls is TrafficClass.CROSS_REGION and topology.cluster_region is not None:
            return topology.resolve(rec.src).region == topology.cluster_region
        return False

    return trace.filter(leaves)


def dimension(
    trace: Trace,
    topology: Topology,
    policy: DimensioningPolicy,
    pricing: CapacityPricing,
) -> Dimensioning:
    link = link_traffic(trace, topology, policy.direction)
    series = rate_series(link, policy.bucket_width)
    peak = 0.0
    if len(series):
        window = max(policy.peak_window, policy.bucket_width)
        peak = peak_rate(series, window)
    capacity = required_capacity(peak, policy)
    return Dimensioning(peak, capacity, bare_metal_monthly_cost(capacity, pricing))
