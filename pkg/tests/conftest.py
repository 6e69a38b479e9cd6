import ipaddress
import random

import pytest

from netcost.traffic import FlowRecord, Topology, Trace, TrafficClass

TOPOLOGY_DOC = {
    "cluster_region": "r1",
    "internet_ips": ["203.0.113.10", "198.51.100.7"],
    "subnets": [
        {"cidr": "10.0.0.0/16", "zone": "a", "region": "r1"},
        {"cidr": "10.0.1.0/24", "zone": "a", "region": "r1"},
        {"cidr": "10.0.2.0/24", "zone": "b", "region": "r1"},
        {"cidr": "10.0.2.128/25", "zone": "c", "region": "r1"},
        {"cidr": "10.1.0.0/16", "zone": "d", "region": "r2"},
    ],
}

# addresses covering every subnet, nested prefixes, and the internet
ADDRESS_POOL = [
    "10.0.0.4", "10.0.1.5", "10.0.1.9", "10.0.2.7", "10.0.2.200",
    "10.0.2.129", "10.1.3.3", "10.1.0.1", "203.0.113.10", "198.51.100.7",
    "8.8.8.8", "172.16.0.1",
]


@pytest.fixture
def topology():
    return Topology.from_dict(TOPOLOGY_DOC)


def brute_force_class(src: str, dst: str, doc=TOPOLOGY_DOC) -> TrafficClass:
    """Reference classifier: linear scan over subnets, longest prefix wins."""

    def where(addr):
        a = ipaddress.ip_address(addr)
        best = None
        for s in doc["subnets"]:
            net = ipaddress.ip_network(s["cidr"])
            if a in net and (best is None or net.prefixlen > best[0]):
                best = (net.prefixlen, s["zone"], s["region"])
        return best

    s, d = where(src), where(dst)
    if s is None and d is None:
        raise ValueError("internet to internet")
    if d is None:
        return TrafficClass.INTERNET_EGRESS
    if s is None:
        return TrafficClass.INTERNET_INGRESS
    if s[1] == d[1]:
        return TrafficClass.IN_ZONE
    if s[2] == d[2]:
        return TrafficClass.CROSS_ZONE
    return TrafficClass.CROSS_REGION


def is_internet(addr: str) -> bool:
    a = ipaddress.ip_address(addr)
    return not any(a in ipaddress.ip_network(s["cidr"]) for s in TOPOLOGY_DOC["subnets"])


def random_trace(rng: random.Random, n: int | None = None) -> Trace:
    n = rng.randint(0, 60) if n is None else n
    records = []
    for _ in range(n):
        while True:
            src, dst = rng.choice(ADDRESS_POOL), rng.choice(ADDRESS_POOL)
            if not (is_internet(src) and is_internet(dst)):
                break
        ts = round(rng.uniform(0, 600), 3)
        records.append(FlowRecord(ts, src, dst, rng.randint(0, 10**10)))
    return Trace(records)
