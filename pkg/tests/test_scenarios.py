import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from netcost.dimensioning import DimensioningPolicy
from netcost.errors import InvalidDuration, InvalidPattern, NonMonotone
from netcost.ingestion import serialize_flow_csv
from netcost.pricing import AWS_LIKE, OVH_ADVANCE2, CapacityPricing, UsagePricing
from netcost.scenarios import (
    LCG,
    SECONDS_PER_MONTH,
    BreakEven,
    Bursty,
    Constant,
    Diurnal,
    DutyCycle,
    MonthlyCostModel,
    NoCrossing,
    PatternFamily,
    bisect_crossing,
    break_even,
    compare,
    cost_ratio,
    egress_rate_for_cost,
    extrapolate_monthly,
    generate_trace,
)
from netcost.traffic import TrafficClass, aggregate_trace

TC = TrafficClass
MEASURED_RATE = egress_rate_for_cost(3.34, 1800, AWS_LIKE)  # B/s behind the 30-minute network cost


def linear_scan_crossing(f, lo, hi, step):
    """First grid point where the sign of f differs from its sign at lo."""
    s0 = f(lo) > 0
    n = int(round((hi - lo) / step))
    for i in range(1, n + 1):
        p = lo + i * step
        if (f(p) > 0) != s0:
            return p
    return None


class TestExtrapolate:
    def test_thirty_minute_window(self):
        assert extrapolate_monthly(3.34, 1800, 1.0) == pytest.approx(4809.60, abs=5e-3)

    def test_eight_percent_of_the_month(self):
        assert extrapolate_monthly(3.34, 1800, 0.08) == pytest.approx(384.768, abs=1e-9)

    def test_zero_cost(self):
        assert extrapolate_monthly(0, 123.0, 0.3) == 0

    def test_bad_duration(self):
        with pytest.raises(InvalidDuration):
            extrapolate_monthly(1.0, 0, 1.0)

    @given(st.floats(0, 1e6), st.floats(0, 1e6), st.floats(1, 1e6), st.floats(0, 1), st.floats(0, 1))
    def test_linear(self, c1, c2, window, s1, s2):
        assert extrapolate_monthly(c1 + c2, window, s1) == pytest.approx(
            extrapolate_monthly(c1, window, s1) + extrapolate_monthly(c2, window, s1), rel=1e-12, abs=1e-9
        )
        lhs = extrapolate_monthly(c1, window, s1 * s2)
        assert lhs == pytest.approx(extrapolate_monthly(c1, window, s1) * s2, rel=1e-12, abs=1e-9)


class TestPatterns:
    @pytest.mark.parametrize(
        "kw", [dict(rate=-1), dict(rate=math.inf)]
    )
    def test_bad_constant(self, kw):
        with pytest.raises(InvalidPattern):
            Constant(**kw)

    def test_bad_duty_cycle(self):
        with pytest.raises(InvalidPattern):
            DutyCycle(1.0, 0.0)
        with pytest.raises(InvalidPattern):
            DutyCycle(1.0, 1.5)

    def test_amplitude_above_mean(self):
        with pytest.raises(InvalidPattern):
            Diurnal(mean=1.0, amplitude=2.0)

    def test_bad_burst_probability(self):
        with pytest.raises(InvalidPattern):
            Bursty(1.0, 2.0, 1.5)

    def test_lcg_reference_values(self):
        # first outputs for seed 0 follow directly from the recurrence
        g = LCG(0)
        assert g.next_u64() == 1442695040888963407
        assert g.next_u64() == (6364136223846793005 * 1442695040888963407 + 1442695040888963407) % 2**64

    def test_diurnal_peak_factor(self):
        p = Diurnal(mean=100.0, amplitude=50.0, period=3600.0)
        # oracle: brute-force the best window start on a fine grid
        w = 600.0
        best = max(
            (p._integral(t + w) - p._integral(t)) / w for t in [i * 3600 / 7200 for i in range(7200)]
        )
        assert p.peak_rate(w) == pytest.approx(best, rel=1e-6)


class TestGenerateTrace:
    def test_load_test_equivalent(self, topology):
        trace = generate_trace(Constant(1.3e7), 300, 1, topology, 1.0)
        assert trace.total_bytes == 3_900_000_000
        totals = aggregate_trace(trace, topology)
        assert totals[TC.INTERNET_EGRESS] == 3_900_000_000
        assert totals.total == totals[TC.INTERNET_EGRESS]
        assert (trace.start, trace.end) == (0.0, 300.0)

    def test_full_duty_cycle_equals_constant(self, topology):
        a = generate_trace(DutyCycle(2.5e6, 1.0), 120, 2, topology, 0.7)
        b = generate_trace(Constant(2.5e6), 120, 2, topology, 0.7)
        assert a == b

    def test_bursty_is_deterministic(self, topology):
        p = Bursty(1e5, 5e7, 0.1, seed=42)
        a = generate_trace(p, 600, 1, topology, 0.9)
        b = generate_trace(p, 600, 1, topology, 0.9)
        assert serialize_flow_csv(a) == serialize_flow_csv(b)
        c = generate_trace(Bursty(1e5, 5e7, 0.1, seed=43), 600, 1, topology, 0.9)
        assert a != c

    def test_egress_share_split(self, topology):
        trace = generate_trace(Constant(1000.0), 10, 1, topology, 0.25)
        totals = aggregate_trace(trace, topology)
        assert totals[TC.INTERNET_EGRESS] == 2500
        assert totals[TC.INTERNET_INGRESS] == 7500

    def test_invalid_arguments(self, topology):
        with pytest.raises(InvalidPattern):
            generate_trace(Constant(1.0), 0.5, 1, topology)
        with pytest.raises(InvalidPattern):
            generate_trace(Constant(1.0), 10, 1, topology, egress_share=1.2)

    @settings(max_examples=60, deadline=None)
    @given(
        st.one_of(
            st.builds(Constant, st.floats(0, 1e8)),
            st.builds(DutyCycle, st.floats(0, 1e8), st.floats(0.01, 1)),
            st.builds(lambda m, f, p: Diurnal(m, m * f, p), st.floats(0, 1e8), st.floats(0, 1), st.floats(10, 5000)),
            st.builds(Bursty, st.floats(0, 1e6), st.floats(0, 1e8), st.floats(0, 1), st.integers(0, 2**40)),
        ),
        st.floats(10, 900),
        st.sampled_from([1.0, 2.5, 10.0]),
    )
    def test_bytes_match_integral(self, pattern, duration, bucket):
        from conftest import TOPOLOGY_DOC
        from netcost.traffic import Topology

        trace = generate_trace(pattern, duration, bucket, Topology.from_dict(TOPOLOGY_DOC), 0.6)
        if isinstance(pattern, Bursty):
            expected = math.fsum(pattern.bucket_bytes(duration, bucket))
            one_bucket = max(pattern.baseline, pattern.burst_rate) * bucket
        else:
            # midpoint quadrature at 0.01 s resolution, independent of the closed forms
            rate = {
                Constant: lambda t: pattern.rate,
                DutyCycle: lambda t: pattern.rate if t < pattern.active_fraction * duration else 0.0,
                Diurnal: lambda t: pattern.mean + pattern.amplitude * math.sin(2 * math.pi * t / pattern.period),
            }[type(pattern)]
            h = 0.01
            n = int(duration / h)
            expected = h * math.fsum(rate((i + 0.5) * h) for i in range(n)) + rate(duration) * (duration - n * h)
            one_bucket = max(pattern.mean_rate(), pattern.peak_rate(bucket)) * bucket
        assert abs(trace.total_bytes - expected) <= one_bucket + 1


class TestCompare:
    def test_load_test_trace(self, topology):
        trace = generate_trace(Constant(1.3e7), 300, 1, topology)
        report = compare(trace, topology, AWS_LIKE, None, OVH_ADVANCE2, DimensioningPolicy())
        assert report.bare_metal_monthly == 176.66
        hand = 3.9e9 / 1e9 * 0.09 * (SECONDS_PER_MONTH / 300)
        assert report.cloud_monthly == pytest.approx(hand, rel=1e-12)
        assert report.ratio == pytest.approx(hand / 176.66, rel=1e-12)
        assert report.per_class_monthly[TC.INTERNET_EGRESS] == pytest.approx(hand, rel=1e-12)

    def test_all_ingress(self, topology):
        trace = generate_trace(Constant(1.3e7), 300, 1, topology, egress_share=0.0)
        report = compare(trace, topology, AWS_LIKE, None, OVH_ADVANCE2, DimensioningPolicy())
        assert report.cloud_monthly == 0.0
        assert report.bare_metal_monthly == 176.66
        assert report.ratio == 0.0

    def test_ratio_of_measured_figures(self):
        assert cost_ratio(4809.60, 176.66) == pytest.approx(27.2252, abs=1e-4)
        assert cost_ratio(1.0, 0.0) is None


class TestBreakEven:
    def test_measured_duty_cycle(self):
        fam = PatternFamily(DutyCycle(MEASURED_RATE, 1.0), "active_fraction")
        result = break_even(fam, (1e-9, 1.0), AWS_LIKE, OVH_ADVANCE2, tolerance=1e-6)
        assert isinstance(result, BreakEven)
        assert result.value == pytest.approx(176.66 / 4809.60, abs=1e-6)
        assert round(result.value, 4) == 0.0367
        model = MonthlyCostModel(AWS_LIKE, OVH_ADVANCE2)
        assert model.cloud_monthly(DutyCycle(MEASURED_RATE, 1.0)) == pytest.approx(4809.60, abs=1e-6)
        assert abs(result.cloud_monthly - result.bare_metal_monthly) <= 1e-6

    def test_duty_cycle_cost_is_proportional(self):
        model = MonthlyCostModel(AWS_LIKE, OVH_ADVANCE2)
        full = model.cloud_monthly(DutyCycle(MEASURED_RATE, 1.0))
        for d in (0.01, 0.08, 0.5):
            assert model.cloud_monthly(DutyCycle(MEASURED_RATE, d)) == pytest.approx(d * full, rel=1e-12)

    def test_all_ingress_never_crosses(self):
        fam = PatternFamily(Constant(1e6), "rate", egress_share=0.0)
        assert break_even(fam, (1.0, 1e9), AWS_LIKE, OVH_ADVANCE2) == NoCrossing("cloud")

    def test_bare_metal_cheaper_everywhere(self):
        fam = PatternFamily(DutyCycle(1e9, 1.0), "active_fraction")
        assert break_even(fam, (0.5, 1.0), AWS_LIKE, OVH_ADVANCE2) == NoCrossing("bare-metal")

    def test_non_monotone_rejected(self):
        with pytest.raises(NonMonotone):
            bisect_crossing(lambda x: math.sin(x), 0.5, 12.0, 1e-6)

    def test_constant_rate_sweep_matches_scan(self):
        fam = PatternFamily(Constant(1.0), "rate")
        lo, hi = 1e5, 1e8
        got = break_even(fam, (lo, hi), AWS_LIKE, OVH_ADVANCE2, tolerance=1e-6)
        model = MonthlyCostModel(AWS_LIKE, OVH_ADVANCE2)
        f = lambda r: model.cloud_monthly(Constant(r)) - model.bare_metal_monthly(Constant(r))
        step = (hi - lo) * 1e-4
        scan = linear_scan_crossing(f, lo, hi, step)
        assert abs(got.value - scan) <= step
        # closed form: 176.66 / (SECONDS_PER_MONTH * 0.09e-9)
        slope = SECONDS_PER_MONTH * 0.09e-9  # $ per (B/s)
        assert got.value == pytest.approx(176.66 / slope, abs=1e-6 / slope + 1e-6)

    def test_randomized_pricing_against_scan(self):
        rng = random.Random(1234)
        for _ in range(20):
            usage = UsagePricing(0.0, 0.02, None, rng.uniform(0.01, 0.2), rng.uniform(0.0, 0.01))
            capacity = CapacityPricing(
                rng.uniform(20, 500), rng.choice([1e8, 1e9, 1e10]), 1e9, rng.uniform(50, 300)
            )
            policy = DimensioningPolicy(rng.uniform(0.3, 1.0))
            share = rng.uniform(0.5, 1.0)
            rate = rng.uniform(1e6, 1e8)
            fam = PatternFamily(DutyCycle(rate, 1.0), "active_fraction", egress_share=share)
            lo, hi, tol = 1e-4, 1.0, 1e-7
            got = break_even(fam, (lo, hi), usage, capacity, policy, tolerance=tol)
            model = MonthlyCostModel(usage, capacity, policy)

            def f(d):
                p, s = fam.at(d)
                return model.cloud_monthly(p, s) - model.bare_metal_monthly(p, s)

            scan = linear_scan_crossing(f, lo, hi, 1e-4)
            if scan is None:
                assert isinstance(got, NoCrossing)
                continue
            assert isinstance(got, BreakEven)
            assert abs(got.value - scan) <= 1e-4 + tol
            assert abs(f(got.value)) <= tol

    def test_egress_share_sweep(self):
        fam = PatternFamily(Constant(MEASURED_RATE), "egress_share")
        got = break_even(fam, (0.0, 1.0), AWS_LIKE, OVH_ADVANCE2)
        assert got.value == pytest.approx(176.66 / 4809.60, abs=1e-6)

    def test_unknown_param(self):
        with pytest.raises(InvalidPattern):
            PatternFamily(Constant(1.0), "active_fraction")
