"""TOML config documents: topology, pricing, policy, and pattern sections.

A topology file may also be a bare document with top-level ``subnets``,
``internet_ips`` and ``cluster_region`` keys.
"""

from __future__ import annotations

import os
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .dimensioning import DimensioningPolicy
from .errors import ConfigError, InputError, InvalidPattern
from .pricing import (
    AWS_LIKE,
    OVH_ADVANCE2,
    CapacityPricing,
    LoadBalancerConfig,
    UsagePricing,
    capacity_pricing_from_dict,
    usage_pricing_from_dict,
)
from .scenarios import PATTERN_KINDS, TrafficPattern
from .traffic import Topology

ENV_VAR = "NETCOST_CONFIG"


def read_toml(path: str | os.PathLike, kind: str = "config") -> dict:
    p = Path(path)
    try:
        raw = p.read_bytes()
    except FileNotFoundError:
        raise InputError(f"{kind} file not found: {p}") from None
    except OSError as exc:
        raise InputError(f"cannot read {kind} file {p}: {exc.strerror}") from None
    try:
        return tomllib.loads(raw.decode("utf-8"))
    except (tomllib.TOMLDecodeError, UnicodeDecodeError) as exc:
        raise InputError(f"{kind} file {p} is not valid TOML: {exc}") from None


def load_topology(path: str | os.PathLike) -> Topology:
    doc = read_toml(path, "topology")
    return Topology.from_dict(doc.get("topology", doc))


def pattern_from_dict(doc: dict) -> TrafficPattern:
    doc = dict(doc)
    kind = doc.pop("kind", None)
    if kind not in PATTERN_KINDS:
        raise InvalidPattern(f"pattern kind must be one of {sorted(PATTERN_KINDS)}, got {kind!r}")
    cls = PATTERN_KINDS[kind]
    try:
        return cls(**doc)
    except TypeError as exc:
        raise InvalidPattern(f"bad {kind} pattern fields: {exc}") from None


@dataclass
class Config:
    """Parsed config document; every section optional."""

    path: Path | None = None
    topology: Topology | None = None
    usage: UsagePricing = AWS_LIKE
    usage_name: str = "aws-like"
    capacity: CapacityPricing = OVH_ADVANCE2
    capacity_name: str = "ovh-advance2"
    load_balancer: LoadBalancerConfig | None = None
    policy: dict = field(default_factory=dict)
    pattern: dict = field(default_factory=dict)

    @classmethod
    def load(cls, path: str | os.PathLike | None) -> Config:
        if path is None:
            return cls()
        doc = read_toml(path)
        try:
            return cls._from_doc(doc, Path(path))
        except (TypeError, ValueError) as exc:
            if isinstance(exc, InputError) and not isinstance(exc, InvalidPattern):
                raise
            raise ConfigError(f"{path}: {exc}") from None

    @classmethod
    def _from_doc(cls, doc: dict, path: Path) -> Config:
        cfg = cls(path=path)
        if "topology" in doc:
            cfg.topology = Topology.from_dict(doc["topology"])
        pricing = doc.get("pricing", {})
        if "usage" in pricing:
            cfg.usage = usage_pricing_from_dict(pricing["usage"], AWS_LIKE)
            cfg.usage_name = f"{pricing['usage'].get('profile', 'aws-like')} ({path.name})"
        if "capacity" in pricing:
            cfg.capacity = capacity_pricing_from_dict(pricing["capacity"], OVH_ADVANCE2)
            cfg.capacity_name = f"{pricing['capacity'].get('profile', 'ovh-advance2')} ({path.name})"
        if "load_balancer" in pricing:
            cfg.load_balancer = LoadBalancerConfig(**pricing["load_balancer"])
        policy = doc.get("policy", {})
        allowed = {f.name for f in fields(DimensioningPolicy)}
        unknown = set(policy) - allowed
        if unknown:
            raise ConfigError(f"unknown policy keys: {sorted(unknown)}")
        DimensioningPolicy(**policy)  # validate early
        cfg.policy = dict(policy)
        cfg.pattern = dict(doc.get("pattern", {}))
        return cfg


def resolve_config_path(flag: str | None) -> str | None:
    """CLI flag wins, then the NETCOST_CONFIG environment variable."""
    return flag if flag else os.environ.get(ENV_VAR) or None
