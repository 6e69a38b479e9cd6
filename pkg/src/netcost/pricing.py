"""Usage-based (managed cloud) and capacity-based (bare metal) cost models.

Billing volumes use decimal gigabytes: 1 GB = 1e9 bytes. Monitoring
dashboards often show binary units (GiB), so convert before comparing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from fractions import Fraction

from .errors import ConfigError, InvalidDuration, MissingRate
from .traffic import ClassTotals, TrafficClass

BYTES_PER_GB = 1e9
GBIT = 1e9


@dataclass(frozen=True)
class UsagePricing:
    """Per-GB rate for each traffic class. ``None`` means "not configured"."""

    in_zone: float | None = None
    cross_zone: float | None = None
    cross_region: float | None = None
    internet_egress: float | None = None
    internet_ingress: float | None = None
    currency: str = "USD"

    def __post_init__(self):
        for cls in TrafficClass:
            rate = getattr(self, cls.value)
            if rate is not None and not rate >= 0:
                raise ConfigError(f"{cls.value} rate must be >= 0, got {rate}")

    def rate(self, cls: TrafficClass) -> float | None:
        return getattr(self, TrafficClass(cls).value)

    def scaled(self, k: float) -> UsagePricing:
        vals = {c.value: (None if self.rate(c) is None else self.rate(c) * k) for c in TrafficClass}
        return UsagePricing(**vals, currency=self.currency)


# cross_region has no published reference value; callers must set it
AWS_LIKE = UsagePricing(
    in_zone=0.00,
    cross_zone=0.02,
    cross_region=None,
    internet_egress=0.09,
    internet_ingress=0.00,
)


@dataclass(frozen=True)
class LoadBalancerConfig:
    lb_zone: str
    backend_zone: str
    hourly_rate: float = 0.0
    per_gb_processed_rate: float = 0.0
    charge_ingress_hop: bool = True

    def __post_init__(self):
        if self.hourly_rate < 0 or self.per_gb_processed_rate < 0:
            raise ConfigError("load balancer rates must be >= 0")

    @property
    def crosses_zone(self) -> bool:
        return self.lb_zone != self.backend_zone


@dataclass(frozen=True)
class CapacityPricing:
    """Monthly link price: a base bundle plus whole capacity increments."""

    base_monthly_price: float
    included_capacity: float  # bits/s
    increment_size: float  # bits/s
    increment_price: float
    currency: str = "USD"

    def __post_init__(self):
        if not self.included_capacity > 0 or not self.increment_size > 0:
            raise ConfigError("included_capacity and increment_size must be > 0")
        if self.base_monthly_price < 0 or self.increment_price < 0:
            raise ConfigError("capacity prices must be >= 0")


OVH_ADVANCE2 = CapacityPricing(
    base_monthly_price=176.66,
    included_capacity=1 * GBIT,
    increment_size=1 * GBIT,
    increment_price=147.00,
)

USAGE_PROFILES = {"aws-like": AWS_LIKE}
CAPACITY_PROFILES = {"ovh-advance2": OVH_ADVANCE2}


@dataclass(frozen=True)
class CostBreakdown:
    per_class: dict[TrafficClass, float]
    lb_cost: float = 0.0
    currency: str = "USD"
    total: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(
            self, "total", math.fsum(self.per_class.values()) + self.lb_cost
        )


def cloud_cost(
    totals: ClassTotals,
    pricing: UsagePricing,
    lb: LoadBalancerConfig | None = None,
    duration: float | None = None,
) -> CostBreakdown:
    """Price class totals under a usage model.

    With a load balancer in a different zone from the backend, each internet
    byte also crosses zones once (backend to LB), billed at the cross-zone
    rate and reported under the cross-zone class.
    """
    hop_bytes = 0
    if lb is not None:
        if duration is None or not duration > 0:
            raise InvalidDuration("a positive duration is required when a load balancer is set")
        if lb.crosses_zone:
            hop_bytes = totals[TrafficClass.INTERNET_EGRESS]
            if lb.charge_ingress_hop:
                hop_bytes += totals[TrafficClass.INTERNET_INGRESS]

    billable = {c: totals[c] for c in TrafficClass}
    billable[TrafficClass.CROSS_ZONE] += hop_bytes

    per_class: dict[TrafficClass, float] = {}
    for cls, nbytes in billable.items():
        rate = pricing.rate(cls)
        if rate is None:
            if nbytes:
                raise MissingRate(f"no rate configured for {cls.value} ({nbytes} bytes)")
            rate = 0.0
        per_class[cls] = nbytes / BYTES_PER_GB * rate

    lb_cost = 0.0
    if lb is not None:
        lb_cost = (
            lb.hourly_rate * duration / 3600.0
            + lb.per_gb_processed_rate * totals.internet_bytes / BYTES_PER_GB
        )
    return CostBreakdown(per_class, lb_cost, pricing.currency)


def bare_metal_monthly_cost(required_capacity: float, pricing: CapacityPricing) -> float:
    if required_capacity < 0:
        raise ValueError(f"required capacity must be >= 0, got {required_capacity}")
    if required_capacity <= pricing.included_capacity:
        return pricing.base_monthly_price
    # exact rational arithmetic so 2e9 over a 1e9 bundle is one increment, never two
    excess = Fraction(required_capacity) - Fraction(pricing.included_capacity)
    increments = math.ceil(excess / Fraction(pricing.increment_size))
    return pricing.base_monthly_price + increments * pricing.increment_price


def usage_pricing_from_dict(doc: dict, base: UsagePricing | None = None) -> UsagePricing:
    names = {f.name for f in fields(UsagePricing)}
    unknown = set(doc) - names - {"profile"}
    if unknown:
        raise ConfigError(f"unknown usage pricing keys: {sorted(unknown)}")
    if "profile" in doc:
        base = usage_profile(doc["profile"])
    vals = {} if base is None else {f.name: getattr(base, f.name) for f in fields(base)}
    vals.update({k: v for k, v in doc.items() if k != "profile"})
    return UsagePricing(**vals)


def capacity_pricing_from_dict(doc: dict, base: CapacityPricing | None = None) -> CapacityPricing:
    names = {f.name for f in fields(CapacityPricing)}
    unknown = set(doc) - names - {"profile"}
    if unknown:
        raise ConfigError(f"unknown capacity pricing keys: {sorted(unknown)}")
    if "profile" in doc:
        base = capacity_profile(doc["profile"])
    vals = {} if base is None else {f.name: getattr(base, f.name) for f in fields(base)}
    vals.update({k: v for k, v in doc.items() if k != "profile"})
    missing = names - set(vals) - {"currency"}
    if missing:
        raise ConfigError(f"capacity pricing missing fields: {sorted(missing)}")
    return CapacityPricing(**vals)


def usage_profile(name: str) -> UsagePricing:
    try:
        return USAGE_PROFILES[name]
    except KeyError:
        raise ConfigError(f"unknown usage pricing profile {name!r}") from None


def capacity_profile(name: str) -> CapacityPricing:
    try:
        return CAPACITY_PROFILES[name]
    except KeyError:
        raise ConfigError(f"unknown capacity pricing profile {name!r}") from None
