"""``netcost`` command line.

Exit codes: 0 success (a "no crossing" break-even answer included),
2 input or parse error, 3 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from dataclasses import replace
from decimal import ROUND_HALF_EVEN, Decimal
from pathlib import Path

from . import __version__
from .config import Config, load_topology, pattern_from_dict, resolve_config_path
from .dimensioning import DimensioningPolicy, dimension
from .errors import ConfigError, InputError
from .ingestion import (
    counters_to_rates,
    parse_flow_csv,
    parse_kubecost_allocation,
    parse_prometheus_text,
    select_series,
    serialize_flow_csv,
)
from .pricing import LoadBalancerConfig, cloud_cost
from .scenarios import (
    PATTERN_KINDS,
    SECONDS_PER_MONTH,
    NoCrossing,
    PatternFamily,
    break_even,
    compare,
    egress_rate_for_cost,
    extrapolate_monthly,
    generate_trace,
)
from .traffic import Topology, TrafficClass, aggregate_trace

EXIT_OK, EXIT_INPUT, EXIT_CONFIG = 0, 2, 3

# used by `simulate` when neither --topology nor a config topology is given
DEFAULT_TOPOLOGY = {
    "cluster_region": "region-1",
    "subnets": [{"cidr": "10.0.0.0/16", "zone": "zone-a", "region": "region-1"}],
    "internet_ips": ["203.0.113.10"],
}

RATIO_NOTE = (
    "ratio = cloud / bare-metal monthly network cost; it is a plain quotient "
    "and is not expressed as a percentage increase"
)


def money(x: float) -> str:
    q = Decimal(repr(float(x))).quantize(Decimal("0.01"), rounding=ROUND_HALF_EVEN)
    if q == 0:
        q = abs(q)
    return f"{q}"


def fixed(x: float, places: int = 2) -> str:
    q = Decimal(repr(float(x))).quantize(Decimal(1).scaleb(-places), rounding=ROUND_HALF_EVEN)
    return f"{abs(q) if q == 0 else q}"


def num(x: float) -> str:
    return repr(float(x))


class Output:
    """Collects provenance and one table; renders as fixed-width text or CSV."""

    def __init__(self, fmt: str):
        self.fmt = fmt
        self.notes: list[tuple[str, str]] = []
        self.headers: list[str] = []
        self.rows: list[list[str]] = []

    def note(self, key: str, value) -> None:
        self.notes.append((key, str(value)))

    def table(self, headers: list[str], rows: list[list]) -> None:
        self.headers = headers
        self.rows = [[str(c) for c in r] for r in rows]

    def render(self) -> tuple[str, str]:
        """(stdout text, stderr text). CSV output keeps provenance on stderr."""
        notes = "".join(f"# {k}: {v}\n" for k, v in self.notes)
        if self.fmt == "csv":
            buf = io.StringIO()
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(self.headers)
            w.writerows(self.rows)
            return buf.getvalue(), notes
        widths = [len(h) for h in self.headers]
        for r in self.rows:
            widths = [max(w, len(c)) for w, c in zip(widths, r)]
        lines = ["  ".join(h.ljust(w) for h, w in zip(self.headers, widths)).rstrip()]
        lines.append("  ".join("-" * w for w in widths))
        for r in self.rows:
            cells = [c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(r, widths))]
            lines.append("  ".join(cells).rstrip())
        return notes + "\n".join(lines) + "\n", ""


# --- shared argument groups --------------------------------------------------


def _global_flags(p: argparse.ArgumentParser, suppress: bool) -> None:
    d = argparse.SUPPRESS if suppress else None
    p.add_argument("--config", default=d, help="TOML config document (env NETCOST_CONFIG)")
    p.add_argument("--format", choices=("table", "csv"), default=d if suppress else "table")
    p.add_argument("--out", default=d, help="write output to PATH instead of stdout")


def _topology_flag(p):
    p.add_argument("--topology", help="topology TOML file (falls back to the config's [topology])")


def _pricing_flags(p):
    g = p.add_argument_group("cloud pricing")
    g.add_argument("--usage-profile", help="built-in usage profile (aws-like)")
    g.add_argument(
        "--class-rate",
        action="append",
        default=[],
        metavar="CLASS=USD_PER_GB",
        help="override one class rate, e.g. cross_region=0.02",
    )
    g.add_argument("--lb-zone")
    g.add_argument("--backend-zone")
    g.add_argument("--lb-hourly", type=float)
    g.add_argument("--lb-per-gb", type=float)
    g.add_argument("--no-lb-ingress-hop", action="store_true", help="charge the LB hop on egress only")


def _capacity_flags(p):
    g = p.add_argument_group("bare-metal pricing")
    g.add_argument("--capacity-profile", help="built-in capacity profile (ovh-advance2)")


def _policy_flags(p):
    g = p.add_argument_group("dimensioning policy")
    g.add_argument("--utilization", type=float, help="target link utilization at peak (default 0.5)")
    g.add_argument("--peak-window", type=float, help="peak averaging window, seconds (default 60)")
    g.add_argument("--bucket", type=float, help="rate bucket width, seconds (default 1)")
    g.add_argument("--direction", choices=("egress", "all"), help="traffic counted toward the link")


def _pattern_flags(p):
    g = p.add_argument_group("traffic pattern")
    g.add_argument("--pattern", "--family", dest="pattern", choices=sorted(PATTERN_KINDS))
    for name in ("rate", "active-fraction", "mean", "amplitude", "period", "baseline",
                 "burst-rate", "burst-probability"):
        g.add_argument(f"--{name}", type=float, dest=f"p_{name.replace('-', '_')}")
    g.add_argument("--seed", type=int, dest="p_seed")


# --- resolution helpers ----------------------------------------------------


def _topology(args, cfg: Config, fallback: bool = False) -> tuple[Topology, str]:
    if getattr(args, "topology", None):
        return load_topology(args.topology), args.topology
    if cfg.topology is not None:
        return cfg.topology, f"{cfg.path} [topology]"
    if fallback:
        return Topology.from_dict(DEFAULT_TOPOLOGY), "built-in default (10.0.0.0/16)"
    raise InputError("no topology given: pass --topology or set [topology] in the config")


def _usage(args, cfg: Config):
    from .pricing import usage_pricing_from_dict, usage_profile

    usage, name = cfg.usage, cfg.usage_name
    if args.usage_profile:
        usage, name = usage_profile(args.usage_profile), args.usage_profile
    overrides = {}
    for item in args.class_rate:
        key, sep, val = item.partition("=")
        if not sep:
            raise ConfigError(f"--class-rate expects CLASS=VALUE, got {item!r}")
        try:
            overrides[TrafficClass(key.strip()).value] = float(val)
        except ValueError:
            raise ConfigError(f"bad --class-rate {item!r}") from None
    if overrides:
        usage = usage_pricing_from_dict(overrides, usage)
        name += " + " + ",".join(f"{k}={v}" for k, v in sorted(overrides.items()))
    return usage, name


def _lb(args, cfg: Config) -> LoadBalancerConfig | None:
    lb = cfg.load_balancer
    given = any(v is not None for v in (args.lb_zone, args.backend_zone, args.lb_hourly, args.lb_per_gb))
    if given or args.no_lb_ingress_hop:
        base = lb or LoadBalancerConfig(lb_zone="", backend_zone="")
        lb = replace(
            base,
            lb_zone=args.lb_zone if args.lb_zone is not None else base.lb_zone,
            backend_zone=args.backend_zone if args.backend_zone is not None else base.backend_zone,
            hourly_rate=args.lb_hourly if args.lb_hourly is not None else base.hourly_rate,
            per_gb_processed_rate=args.lb_per_gb if args.lb_per_gb is not None else base.per_gb_processed_rate,
            charge_ingress_hop=base.charge_ingress_hop and not args.no_lb_ingress_hop,
        )
    return lb


def _capacity(args, cfg: Config):
    from .pricing import capacity_profile

    if args.capacity_profile:
        return capacity_profile(args.capacity_profile), args.capacity_profile
    return cfg.capacity, cfg.capacity_name


def _policy(args, cfg: Config) -> DimensioningPolicy:
    vals = dict(cfg.policy)
    for flag, key in (("utilization", "utilization_target"), ("peak_window", "peak_window"),
                      ("bucket", "bucket_width"), ("direction", "direction")):
        v = getattr(args, flag, None)
        if v is not None:
            vals[key] = v
    return DimensioningPolicy(**vals)


def _policy_note(policy: DimensioningPolicy) -> str:
    return (
        f"utilization={policy.utilization_target} peak_window={policy.peak_window}s "
        f"bucket={policy.bucket_width}s direction={policy.direction}"
    )


def _pattern_doc(args, cfg: Config) -> dict:
    doc = dict(cfg.pattern)
    if args.pattern:
        if doc.get("kind") != args.pattern:
            doc = {}
        doc["kind"] = args.pattern
    cls = PATTERN_KINDS.get(doc.get("kind"))
    names = set(cls.__dataclass_fields__) if cls else set()
    for key, val in vars(args).items():
        if key.startswith("p_") and val is not None:
            field_name = key[2:]
            if cls is not None and field_name not in names:
                raise ConfigError(f"--{field_name.replace('_', '-')} does not apply to {doc['kind']}")
            doc[field_name] = val
    return doc


def _read(path: str, kind: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except FileNotFoundError:
        raise InputError(f"{kind} file not found: {path}") from None
    except OSError as exc:
        raise InputError(f"cannot read {kind} file {path}: {exc.strerror}") from None


def _trace(path: str):
    return parse_flow_csv(_read(path, "trace"))


# --- subcommands -----------------------------------------------------------


def cmd_classify(args, cfg, out: Output):
    topo, topo_src = _topology(args, cfg)
    totals = aggregate_trace(_trace(args.trace), topo)
    out.note("trace", args.trace)
    out.note("topology", topo_src)
    shares = totals.shares()
    rows = [[c.value, totals[c], fixed(100 * shares[c])] for c in TrafficClass]
    rows.append(["total", totals.total, fixed(100.0 if totals.total else 0.0)])
    out.table(["class", "bytes", "share_pct"], rows)


def cmd_cost(args, cfg, out: Output):
    topo, topo_src = _topology(args, cfg)
    trace = _trace(args.trace)
    usage, usage_name = _usage(args, cfg)
    lb = _lb(args, cfg)
    totals = aggregate_trace(trace, topo)
    duration = trace.duration if trace.has_window else 0.0
    breakdown = cloud_cost(totals, usage, lb, duration if lb else None)
    out.note("trace", args.trace)
    out.note("topology", topo_src)
    out.note("usage pricing", usage_name)
    out.note("load balancer", _lb_note(lb))
    out.note("window_seconds", num(duration))
    rows = [[c.value, totals[c], money(breakdown.per_class[c])] for c in TrafficClass]
    rows.append(["load_balancer", totals.internet_bytes if lb else 0, money(breakdown.lb_cost)])
    rows.append(["total", totals.total, money(breakdown.total)])
    out.table(["item", "bytes", "cost"], rows)


def _lb_note(lb: LoadBalancerConfig | None) -> str:
    if lb is None:
        return "none"
    return (
        f"lb_zone={lb.lb_zone} backend_zone={lb.backend_zone} hourly={lb.hourly_rate} "
        f"per_gb={lb.per_gb_processed_rate} ingress_hop={lb.charge_ingress_hop}"
    )


def cmd_dimension(args, cfg, out: Output):
    topo, topo_src = _topology(args, cfg)
    capacity, cap_name = _capacity(args, cfg)
    policy = _policy(args, cfg)
    result = dimension(_trace(args.trace), topo, policy, capacity)
    out.note("trace", args.trace)
    out.note("topology", topo_src)
    out.note("capacity pricing", cap_name)
    out.note("policy", _policy_note(policy))
    out.table(
        ["peak_bps", "required_bps", "monthly_cost"],
        [[num(result.peak_rate), num(result.capacity), money(result.monthly_cost)]],
    )


def cmd_simulate(args, cfg, out: Output):
    topo, topo_src = _topology(args, cfg, fallback=True)
    pattern = pattern_from_dict(_pattern_doc(args, cfg))
    trace = generate_trace(pattern, args.duration, args.bucket_width, topo, args.egress_share, args.start)
    out.note("pattern", pattern)
    out.note("topology", topo_src)
    out.note("duration", f"{num(args.duration)}s bucket={num(args.bucket_width)}s egress_share={args.egress_share}")
    out.note("total_bytes", trace.total_bytes)
    # the trace itself is the result; always flow CSV
    out.raw = serialize_flow_csv(trace)


def cmd_extrapolate(args, cfg, out: Output):
    monthly = extrapolate_monthly(args.cost, args.window, args.scale)
    out.note("month", f"{SECONDS_PER_MONTH} s (30 days)")
    out.table(
        ["window_cost", "window_seconds", "scale", "monthly_cost"],
        [[money(args.cost), num(args.window), num(args.scale), money(monthly)]],
    )


def cmd_breakeven(args, cfg, out: Output):
    usage, usage_name = _usage(args, cfg)
    capacity, cap_name = _capacity(args, cfg)
    policy = _policy(args, cfg)
    lb = _lb(args, cfg)
    doc = _pattern_doc(args, cfg)
    kind = doc.get("kind")
    if kind is None:
        raise ConfigError("breakeven needs --family (or [pattern] kind in the config)")
    param = args.param or {"duty-cycle": "active_fraction", "constant": "rate",
                           "diurnal": "rate", "bursty": "burst_probability"}[kind]
    if args.cost is not None:
        if args.window is None:
            raise ConfigError("--cost needs --window")
        rate = egress_rate_for_cost(args.cost, args.window, usage)
        key = "mean" if kind == "diurnal" else "baseline" if kind == "bursty" else "rate"
        doc[key] = rate
        out.note("anchor", f"window cost {money(args.cost)} over {num(args.window)}s -> egress rate {num(rate)} B/s")
    lo_hi = args.range
    if lo_hi is None:
        if param in ("active_fraction", "egress_share", "burst_probability"):
            lo_hi = [1e-9, 1.0]
        else:
            raise ConfigError(f"--range LO HI is required when sweeping {param}")
    # placeholder for the swept field so the template validates
    template_doc = dict(doc)
    if param == "active_fraction":
        template_doc.setdefault("active_fraction", 1.0)
    elif param == "rate":
        template_doc.setdefault("mean" if kind == "diurnal" else "baseline" if kind == "bursty" else "rate", lo_hi[0])
        if kind == "diurnal":
            template_doc.setdefault("amplitude", 0.0)
    if kind == "bursty":
        template_doc.setdefault("burst_probability", 0.0)
    family = PatternFamily(pattern_from_dict(template_doc), param, args.egress_share)
    result = break_even(family, (lo_hi[0], lo_hi[1]), usage, capacity, policy, args.tolerance, lb)
    out.note("family", f"{kind} sweeping {param} over [{num(lo_hi[0])}, {num(lo_hi[1])}]")
    out.note("usage pricing", usage_name)
    out.note("capacity pricing", cap_name)
    out.note("policy", _policy_note(policy))
    out.note("tolerance", args.tolerance)
    if isinstance(result, NoCrossing):
        out.note("result", str(result))
        out.table(["param", "break_even", "cheaper"], [[param, "none", result.cheaper]])
        return
    out.table(
        ["param", "break_even", "cloud_monthly", "bare_metal_monthly"],
        [[param, fixed(result.value, 4), money(result.cloud_monthly), money(result.bare_metal_monthly)]],
    )


def cmd_compare(args, cfg, out: Output):
    topo, topo_src = _topology(args, cfg)
    usage, usage_name = _usage(args, cfg)
    capacity, cap_name = _capacity(args, cfg)
    policy = _policy(args, cfg)
    lb = _lb(args, cfg)
    report = compare(_trace(args.trace), topo, usage, lb, capacity, policy)
    out.note("trace", args.trace)
    out.note("topology", topo_src)
    out.note("usage pricing", usage_name)
    out.note("capacity pricing", cap_name)
    out.note("load balancer", _lb_note(lb))
    out.note("policy", _policy_note(policy))
    out.note("window_seconds", num(report.window_duration))
    out.note("required_bps", num(report.bare_metal.capacity))
    out.note("ratio", RATIO_NOTE)
    ratio = "n/a" if report.ratio is None else fixed(report.ratio, 4)
    rows = [
        [f"cloud:{c.value}", report.totals[c], money(report.window_cost.per_class[c]),
         money(report.per_class_monthly[c])]
        for c in TrafficClass
    ]
    lb_monthly = extrapolate_monthly(report.window_cost.lb_cost, report.window_duration)
    rows.append(["cloud:load_balancer", "", money(report.window_cost.lb_cost), money(lb_monthly)])
    rows.append(["cloud_monthly", report.totals.total, money(report.window_cost.total), money(report.cloud_monthly)])
    rows.append(["bare_metal_monthly", "", "", money(report.bare_metal_monthly)])
    rows.append(["ratio", "", "", ratio])
    out.table(["item", "bytes", "window_cost", "monthly"], rows)


def cmd_ingest(args, cfg, out: Output):
    text = _read(args.file, args.kind)
    out.note("source", f"{args.kind}:{args.file}")
    if args.kind == "prometheus":
        samples = parse_prometheus_text(text, args.scrape_time, strict=not args.lenient)
        if args.metric is None:
            rows = [[s.name, ",".join(f"{k}={v}" for k, v in sorted(s.labels.items())),
                     num(s.value), num(s.timestamp)] for s in samples]
            out.table(["metric", "labels", "value", "timestamp"], rows)
            return
        labels = {}
        for item in args.label:
            k, sep, v = item.partition("=")
            if not sep:
                raise InputError(f"--label expects KEY=VALUE, got {item!r}")
            labels[k] = v
        series = counters_to_rates(select_series(samples, args.metric, **labels), args.reset)
        out.note("series", f"{args.metric}{labels} reset={args.reset} bucket={num(series.bucket_width)}s")
        out.table(["start", "bytes_per_s"], [[num(t), num(r)] for t, r in series.samples])
    elif args.kind == "kubecost":
        alloc = parse_kubecost_allocation(text)
        monthly = extrapolate_monthly(alloc.network_cost, alloc.window_duration, args.scale)
        out.note("window_seconds", num(alloc.window_duration))
        rows = [[c.value, alloc.totals[c]] for c in TrafficClass]
        rows.append(["network_cost", money(alloc.network_cost)])
        rows.append(["monthly_network_cost", money(monthly)])
        out.table(["item", "value"], rows)
    else:
        trace = parse_flow_csv(text)
        window = [num(trace.start), num(trace.end)] if trace.has_window else ["", ""]
        out.table(["records", "start", "end", "total_bytes"], [[len(trace), *window, trace.total_bytes]])


# --- parser ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, suppress=True)

    parser = argparse.ArgumentParser(
        prog="netcost",
        description="Kubernetes network cost modelling: managed cloud vs bare metal.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("classify", parents=[common], help="bytes per traffic class")
    p.add_argument("trace", help="flow CSV (timestamp,src,dst,bytes)")
    _topology_flag(p)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("cost", parents=[common], help="cloud cost of a trace window")
    p.add_argument("trace")
    _topology_flag(p)
    _pricing_flags(p)
    p.set_defaults(func=cmd_cost)

    p = sub.add_parser("dimension", parents=[common], help="bare-metal link size and price")
    p.add_argument("trace")
    _topology_flag(p)
    _capacity_flags(p)
    _policy_flags(p)
    p.set_defaults(func=cmd_dimension)

    p = sub.add_parser("simulate", parents=[common], help="generate a synthetic flow CSV")
    _topology_flag(p)
    _pattern_flags(p)
    p.add_argument("--duration", type=float, required=True, help="seconds")
    p.add_argument("--bucket-width", type=float, default=1.0, help="seconds per flow (default 1)")
    p.add_argument("--egress-share", type=float, default=1.0)
    p.add_argument("--start", type=float, default=0.0, help="first timestamp (unix seconds)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("extrapolate", parents=[common], help="scale a window cost to a month")
    p.add_argument("--cost", type=float, required=True)
    p.add_argument("--window", type=float, required=True, help="seconds")
    p.add_argument("--scale", type=float, default=1.0, help="fraction of the month at this intensity")
    p.set_defaults(func=cmd_extrapolate)

    p = sub.add_parser("breakeven", parents=[common], help="where cloud and bare metal cost the same")
    _pattern_flags(p)
    p.add_argument("--param", help="swept parameter (rate, active_fraction, egress_share, ...)")
    p.add_argument("--range", nargs=2, type=float, metavar=("LO", "HI"))
    p.add_argument("--tolerance", type=float, default=1e-6)
    p.add_argument("--egress-share", type=float, default=1.0)
    p.add_argument("--cost", type=float, help="measured window cost anchoring the rate")
    p.add_argument("--window", type=float, help="measured window length, seconds")
    _pricing_flags(p)
    _capacity_flags(p)
    _policy_flags(p)
    p.set_defaults(func=cmd_breakeven)

    p = sub.add_parser("compare", parents=[common], help="monthly cloud vs bare-metal report")
    p.add_argument("trace")
    _topology_flag(p)
    _pricing_flags(p)
    _capacity_flags(p)
    _policy_flags(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("ingest", parents=[common], help="parse external evidence")
    p.add_argument("kind", choices=("prometheus", "kubecost", "flows"))
    p.add_argument("file")
    p.add_argument("--metric", help="prometheus: counter to convert to a rate series")
    p.add_argument("--label", action="append", default=[], metavar="KEY=VALUE")
    p.add_argument("--scrape-time", type=float, help="prometheus: timestamp for unstamped samples")
    p.add_argument("--lenient", action="store_true", help="prometheus: skip malformed lines")
    p.add_argument("--reset", choices=("restart", "skip"), default="restart")
    p.add_argument("--scale", type=float, default=1.0, help="kubecost: monthly pattern scale")
    p.set_defaults(func=cmd_ingest)
    return parser


def run(argv: list[str] | None = None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_INPUT
    out = Output(args.format)
    out.raw = None
    try:
        cfg = Config.load(resolve_config_path(args.config))
        args.func(args, cfg, out)
    except ConfigError as exc:
        print(f"netcost: configuration error: {exc}", file=stderr)
        return EXIT_CONFIG
    except (InputError, ValueError, OSError) as exc:
        print(f"netcost: error: {exc}", file=stderr)
        return EXIT_INPUT

    if out.raw is not None:
        text, notes = out.raw, "".join(f"# {k}: {v}\n" for k, v in out.notes)
    else:
        text, notes = out.render()
    if args.out:
        try:
            Path(args.out).write_text(text, encoding="utf-8")
        except OSError as exc:
            print(f"netcost: error: cannot write {args.out}: {exc.strerror}", file=stderr)
            return EXIT_INPUT
    else:
        stdout.write(text)
    if notes:
        stderr.write(notes)
    return EXIT_OK


def main() -> None:
    sys.exit(run())
