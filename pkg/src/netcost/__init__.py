"""Network cost modelling for Kubernetes workloads on managed cloud vs bare metal."""

__version__ = "0.1.0"

from .dimensioning import Dimensioning, DimensioningPolicy, dimension, peak_rate, required_capacity
from .ingestion import (
    CounterSample,
    counters_to_rates,
    parse_flow_csv,
    parse_kubecost_allocation,
    parse_prometheus_text,
    serialize_flow_csv,
)
from .pricing import (
    AWS_LIKE,
    OVH_ADVANCE2,
    CapacityPricing,
    CostBreakdown,
    LoadBalancerConfig,
    UsagePricing,
    bare_metal_monthly_cost,
    cloud_cost,
)
from .scenarios import (
    SECONDS_PER_MONTH,
    BreakEven,
    Bursty,
    ComparisonReport,
    Constant,
    Diurnal,
    DutyCycle,
    MonthlyCostModel,
    NoCrossing,
    PatternFamily,
    break_even,
    compare,
    extrapolate_monthly,
    generate_trace,
)
from .traffic import (
    ClassTotals,
    FlowRecord,
    RateSeries,
    Topology,
    Trace,
    TrafficClass,
    aggregate_trace,
    classify_flow,
    rate_series,
)
