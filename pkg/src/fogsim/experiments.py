"""Experiment runners: robot sweeps for architectures A/B, fog-server
sweeps for architecture C, and the rescue-robot scenario.

Every sweep point is its own scenario. Calibration fits the parameters the
published figures leave unstated (service times, arrival interval, cloud
capacity) against the quoted endpoint latencies before the sweep runs.
"""

from __future__ import annotations

import csv
import io
import math
import statistics
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from .calibration import CalibrationTarget, Knob, calibrate
from .engine import run, scenario_hash
from .model import CLOUD_RTT_MS, Constant, Empirical, NodeSpec, Position, Role
from .rng import ALGORITHM
from .routing import CaseA, CaseB, CaseC, CloudOnly, LinkDefault, SurgeMonitor
from .scenario import Scenario, Waypoint
from .workload import FixedInterval, Hot, Poisson, WorkloadSpec

CSV_COLUMNS = [
    "experiment", "arch", "frs_count", "robots", "target", "resolution_mix",
    "lat_min_ms", "lat_mean_ms", "lat_median_ms", "lat_p95_ms", "lat_max_ms",
    "deadline_met_fraction", "samples", "seed",
]

# Endpoint latencies (ms) quoted for the robot sweep: (1 robot, 5 robots).
AB_TARGETS = {
    "FR": (8.58, 19.51),
    "D2D": (3.82, 6.75),
    "Sydney": (208.0, 208.39),
    "Seoul": (540.04, 540.43),
    "SaoPaulo": (1085.71, 1086.09),
}
# Fog latency held across the server sweep, and cloud endpoints at 2 and 20 servers.
C_FR_TARGET = 10.73
C_CLOUD_TARGETS = {
    "Sydney": (208.07, 3609.32),
    "Seoul": (270.38, 3884.3),
    "SaoPaulo": (1086.4, 4336.18),
}
C_FRS_COUNTS = (2, 5, 10, 15, 20)
ROBOTS_PER_FRS = 4


def cloud_link_model(region, stochastic=False):
    lo, avg, hi = CLOUD_RTT_MS[region]
    if stochastic:
        return Empirical.from_round_trip(lo, avg, hi)
    return Constant(avg / 2.0)


@dataclass(frozen=True)
class ABConfig:
    robot_counts: Tuple[int, ...] = (1, 2, 3, 4, 5)
    regions: Tuple[str, ...] = ("Sydney", "Seoul", "SaoPaulo")
    seed: int = 2020
    requests_per_robot: int = 20
    key_universe: int = 8
    payload_bytes: int = 64
    fr_one_way_ms: float = 1.0
    d2d_one_way_ms: float = 0.25
    d2d_range_m: float = 10.0
    d2d_lag_ms: float = 2.0
    cloud_servers: int = 1
    fr_tolerance: float = 0.05
    cloud_tolerance: float = 0.01
    stochastic: bool = False


@dataclass(frozen=True)
class CConfig:
    frs_counts: Tuple[int, ...] = C_FRS_COUNTS
    regions: Tuple[str, ...] = ("Sydney", "Seoul", "SaoPaulo")
    seed: int = 2020
    requests_per_robot: int = 20
    fr_interval_ms: float = 200.0
    key_universe: int = 8
    payload_bytes: int = 64
    fr_one_way_ms: float = 1.0
    frs_spacing_m: float = 100.0
    adjacent_one_way_ms: float = 2.0
    fr_tolerance: float = 0.05
    cloud_tolerance: float = 0.10
    stochastic: bool = False


def _ring(n, radius, centre=(0.0, 0.0), phase=0.0):
    return [
        Position(centre[0] + radius * math.cos(phase + 2 * math.pi * i / max(n, 1)),
                 centre[1] + radius * math.sin(phase + 2 * math.pi * i / max(n, 1)))
        for i in range(n)
    ]


def _workload(interval, per_robot, universe, payload, robots=()):
    return WorkloadSpec(
        arrival=FixedInterval(interval, phase_spread=True),
        duration_ms=per_robot * interval,
        key_universe=universe,
        request_bytes=payload,
        response_bytes=payload,
        robots=tuple(robots),
    )


def _fog_site(frs_id, centre, service, servers, capacity, radius=50.0):
    return NodeSpec(frs_id, Role.FRS, Position(*centre), service_time_ms=service,
                    parallel_servers=servers, cache_capacity=capacity, coverage_radius_m=radius)


def ab_scenario(column: str, n_robots: int, params: Dict[str, float], cfg: ABConfig = ABConfig(),
                stochastic: Optional[bool] = None) -> Scenario:
    """One point of the robot sweep. ``column`` is FR, D2D or a cloud region."""
    stochastic = cfg.stochastic if stochastic is None else stochastic
    service = params["service_ms"]
    interval = params["interval_ms"]
    names = [f"r{i + 1}" for i in range(n_robots)]
    wl = _workload(interval, cfg.requests_per_robot, cfg.key_universe, cfg.payload_bytes, names)

    if column in CLOUD_RTT_MS:
        cloud = NodeSpec(f"cloud-{column}", Role.CLOUD, service_time_ms=service,
                         parallel_servers=cfg.cloud_servers)
        robots = [NodeSpec(r, Role.ROBOT, p) for r, p in zip(names, _ring(n_robots, 10.0))]
        return Scenario(
            nodes=tuple(robots) + (cloud,), links=(), policy=CloudOnly(), seed=cfg.seed,
            workloads=(wl,),
            link_defaults=(LinkDefault((Role.ROBOT, Role.CLOUD), cloud_link_model(column, stochastic)),),
            name=f"ab-{column}-{n_robots}",
        )

    fog_service = params.get("frs_service_ms", service)
    frs = _fog_site("frs", (0.0, 0.0), fog_service, 1, cfg.key_universe)
    cloud = NodeSpec("cloud-Sydney", Role.CLOUD, service_time_ms=0.0, parallel_servers=1)
    defaults = [
        LinkDefault((Role.ROBOT, Role.FRS), Constant(cfg.fr_one_way_ms)),
        LinkDefault((Role.FRS, Role.CLOUD), cloud_link_model("Sydney", stochastic)),
    ]
    if column == "FR":
        robots = [NodeSpec(r, Role.ROBOT, p) for r, p in zip(names, _ring(n_robots, 10.0))]
        policy = CaseA()
    elif column == "D2D":
        keys = tuple(f"key-{k}" for k in range(cfg.key_universe))
        peer = NodeSpec("peer", Role.ROBOT, Position(5.0, 0.0), service_time_ms=service, holds=keys)
        robots = [peer] + [NodeSpec(r, Role.ROBOT, p)
                           for r, p in zip(names, _ring(n_robots, 3.0, centre=(5.0, 0.0)))]
        defaults.append(LinkDefault((Role.ROBOT, Role.ROBOT), Constant(cfg.d2d_one_way_ms)))
        policy = CaseB(cfg.d2d_range_m, cfg.d2d_lag_ms)
    else:
        raise KeyError(f"unknown column {column!r}")
    return Scenario(
        nodes=tuple(robots) + (frs, cloud), links=(), policy=policy, seed=cfg.seed,
        workloads=(wl,), link_defaults=tuple(defaults), prewarm=True,
        name=f"ab-{column}-{n_robots}",
    )


def c_fr_scenario(n_frs: int, params: Dict[str, float], cfg: CConfig = CConfig(),
                  stochastic: Optional[bool] = None) -> Scenario:
    stochastic = cfg.stochastic if stochastic is None else stochastic
    servers = [
        _fog_site(f"frs{f + 1:02d}", (f * cfg.frs_spacing_m, 0.0), params["service_ms"], 1,
                  cfg.key_universe, radius=0.6 * cfg.frs_spacing_m)
        for f in range(n_frs)
    ]
    robots = []
    # robot-major order keeps each server's robots a quarter interval apart
    for j in range(ROBOTS_PER_FRS):
        for f, s in enumerate(servers):
            p = _ring(ROBOTS_PER_FRS, 10.0, centre=(s.position.x, s.position.y))[j]
            robots.append(NodeSpec(f"r{f + 1:02d}-{j + 1}", Role.ROBOT, p))
    cloud = NodeSpec("cloud-Sydney", Role.CLOUD, service_time_ms=0.0)
    adjacency = tuple((servers[i].id, servers[i + 1].id) for i in range(n_frs - 1))
    wl = _workload(cfg.fr_interval_ms, cfg.requests_per_robot, cfg.key_universe, cfg.payload_bytes)
    return Scenario(
        nodes=tuple(robots) + tuple(servers) + (cloud,), links=(), policy=CaseC(adjacency),
        seed=cfg.seed, workloads=(wl,), prewarm=True,
        link_defaults=(
            LinkDefault((Role.ROBOT, Role.FRS), Constant(cfg.fr_one_way_ms)),
            LinkDefault((Role.FRS, Role.FRS), Constant(cfg.adjacent_one_way_ms)),
            LinkDefault((Role.FRS, Role.CLOUD), cloud_link_model("Sydney", stochastic)),
        ),
        name=f"c-FR-{n_frs}",
    )


def c_cloud_scenario(region: str, n_frs: int, params: Dict[str, float], cfg: CConfig = CConfig(),
                     stochastic: Optional[bool] = None) -> Scenario:
    """Every robot of every site talks straight to one capacity-limited region."""
    stochastic = cfg.stochastic if stochastic is None else stochastic
    robots = []
    for j in range(ROBOTS_PER_FRS):
        for f in range(n_frs):
            p = _ring(ROBOTS_PER_FRS, 10.0, centre=(f * cfg.frs_spacing_m, 0.0))[j]
            robots.append(NodeSpec(f"r{f + 1:02d}-{j + 1}", Role.ROBOT, p))
    cloud = NodeSpec(f"cloud-{region}", Role.CLOUD, service_time_ms=params["service_ms"],
                     parallel_servers=int(params["cloud_servers"]))
    per_robot = int(params["requests_per_robot"])
    wl = _workload(params["interval_ms"], per_robot, cfg.key_universe, cfg.payload_bytes)
    return Scenario(
        nodes=tuple(robots) + (cloud,), links=(), policy=CloudOnly(), seed=cfg.seed,
        workloads=(wl,),
        link_defaults=(LinkDefault((Role.ROBOT, Role.CLOUD), cloud_link_model(region, stochastic)),),
        name=f"c-{region}-{n_frs}",
    )


def size_cloud(service_ms, low_robots, high_robots, wait_ms, preferred_requests=20):
    """Pick (servers, requests per robot) for a transient-overload sweep.

    With arrivals spread evenly over the interval, a region of c servers
    is overloaded once robots * service / c exceeds the interval, and the
    backlog makes the average request wait about
    (robots * per_robot / 2) * (service / c - interval / robots).
    Keeping service / c about 1.2x the per-arrival backlog growth leaves the
    low point just under capacity and every larger point above it.
    """
    best = None
    for per_robot in range(8, 61):
        growth = 2.0 * wait_ms / (high_robots * per_robot - 1)
        for servers in {max(1, math.floor(service_ms / (1.2 * growth))),
                        max(1, math.ceil(service_ms / (1.2 * growth)))}:
            ratio = (service_ms / servers) / growth
            lo_ok = ratio >= high_robots / (high_robots - low_robots) * 1.01
            hi_ok = ratio * 0.99 < high_robots / (high_robots - 2.5 * low_robots) if high_robots > 2.5 * low_robots else True
            if not (lo_ok and hi_ok):
                continue
            key = (abs(ratio - 1.2) > 0.05, abs(per_robot - preferred_requests), abs(ratio - 1.2))
            if best is None or key < best[0]:
                best = (key, servers, per_robot)
    if best is None:
        raise ValueError("no cloud sizing keeps the low point under capacity")
    return best[1], best[2]


@dataclass
class Calibrated:
    params: Dict[str, Dict[str, float]]
    achieved: Dict[str, Dict[str, float]] = field(default_factory=dict)


def calibrate_ab(cfg: ABConfig = ABConfig(), columns: Optional[Sequence[str]] = None) -> Calibrated:
    columns = list(columns) if columns is not None else ["FR", "D2D", *cfg.regions]
    lo_n, hi_n = min(cfg.robot_counts), max(cfg.robot_counts)
    out = Calibrated({})
    for col in columns:
        lo_t, hi_t = AB_TARGETS[col]
        tol = cfg.cloud_tolerance if col in CLOUD_RTT_MS else cfg.fr_tolerance
        slack = 4.0 * hi_n * lo_t

        def build(n):
            return lambda p, n=n, col=col: ab_scenario(col, n, p, cfg, stochastic=False)

        targets = [
            CalibrationTarget(f"{col}@{lo_n}", build(lo_n), lo_t, tol),
            CalibrationTarget(f"{col}@{hi_n}", build(hi_n), hi_t, tol),
        ]
        knobs = [
            Knob("service_ms", 0.0, lo_t, target=targets[0].label),
            Knob("interval_ms", lo_t / 4.0, slack, target=targets[1].label),
        ]
        res = calibrate(targets, knobs, {"interval_ms": slack})
        out.params[col] = res.params
        out.achieved[col] = res.achieved
    return out


def calibrate_c(cfg: CConfig = CConfig(), regions: Optional[Sequence[str]] = None,
                include_fr: bool = True) -> Calibrated:
    regions = list(cfg.regions if regions is None else regions)
    lo_f, hi_f = min(cfg.frs_counts), max(cfg.frs_counts)
    out = Calibrated({})
    if include_fr:
        target = CalibrationTarget(
            f"FR@{lo_f}", lambda p: c_fr_scenario(lo_f, p, cfg, stochastic=False), C_FR_TARGET, cfg.fr_tolerance)
        res = calibrate([target], [Knob("service_ms", 0.0, C_FR_TARGET)])
        out.params["FR"], out.achieved["FR"] = res.params, res.achieved
    for region in regions:
        lo_t, hi_t = C_CLOUD_TARGETS[region]
        base_rtt = CLOUD_RTT_MS[region][1]
        service_guess = lo_t - base_rtt
        servers, per_robot = size_cloud(service_guess, lo_f * ROBOTS_PER_FRS, hi_f * ROBOTS_PER_FRS,
                                        hi_t - lo_t, cfg.requests_per_robot)
        slack = 4.0 * hi_f * ROBOTS_PER_FRS * lo_t

        def build(n, region=region):
            return lambda p: c_cloud_scenario(region, n, p, cfg, stochastic=False)

        targets = [
            CalibrationTarget(f"{region}@{lo_f}", build(lo_f), lo_t, cfg.cloud_tolerance),
            CalibrationTarget(f"{region}@{hi_f}", build(hi_f), hi_t, cfg.cloud_tolerance),
        ]
        knobs = [
            Knob("service_ms", 0.0, lo_t, target=targets[0].label),
            Knob("interval_ms", 1.0, slack, target=targets[1].label),
        ]
        start = {"interval_ms": slack, "cloud_servers": servers, "requests_per_robot": per_robot}
        res = calibrate(targets, knobs, start, precision=1e-3)
        out.params[region], out.achieved[region] = res.params, res.achieved
    return out


@dataclass
class Row:
    experiment: str
    arch: str
    frs_count: int
    robots: int
    target: str
    stats: object
    resolution_mix: str
    deadline_met_fraction: Optional[float]
    seed: int

    def values(self):
        s = self.stats

        def fmt(v):
            return "" if v is None else f"{v:.6f}"

        return [
            self.experiment, self.arch, str(self.frs_count), str(self.robots), self.target,
            self.resolution_mix, fmt(s.min_ms), fmt(s.mean_ms), fmt(s.median_ms), fmt(s.p95_ms),
            fmt(s.max_ms), fmt(self.deadline_met_fraction), str(s.count), str(self.seed),
        ]


@dataclass
class ResultTable:
    rows: List[Row]
    metadata: Dict[str, str] = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        for k in sorted(self.metadata):
            buf.write(f"# {k}={self.metadata[k]}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for row in self.rows:
            w.writerow(row.values())
        return buf.getvalue()

    def select(self, target, **match):
        return [r for r in self.rows if r.target == target
                and all(getattr(r, k) == v for k, v in match.items())]

    def means(self, target, by="robots"):
        return {getattr(r, by): r.stats.mean_ms for r in self.select(target)}


def resolution_mix(trace) -> str:
    counts = {}
    for rec in trace.records:
        if rec.resolution:
            counts[rec.resolution] = counts.get(rec.resolution, 0) + 1
    return ";".join(f"{k}={counts[k]}" for k in sorted(counts))


def deadline_met_fraction(trace) -> Optional[float]:
    bearing = [r for r in trace.records if r.deadline_ms is not None]
    if not bearing:
        return None
    met = sum(1 for r in bearing if r.complete_ms is not None and r.latency_ms <= r.deadline_ms)
    return met / len(bearing)


def _row(experiment, arch, frs_count, robots, target, scenario, metric="all"):
    trace, stats = run(scenario)
    return Row(experiment, arch, frs_count, robots, target, stats[metric], resolution_mix(trace),
               deadline_met_fraction(trace), scenario.seed), trace


def _metadata(seed, fingerprint):
    return {"seed": str(seed), "config_hash": fingerprint, "prng": ALGORITHM}


def run_experiment_ab(cfg: ABConfig = ABConfig(), calibrated: Optional[Calibrated] = None) -> ResultTable:
    calibrated = calibrated or calibrate_ab(cfg)
    rows, hashes = [], []
    for col in ["FR", "D2D", *cfg.regions]:
        params = calibrated.params[col]
        arch = "A" if col == "FR" else "B" if col == "D2D" else "cloud"
        for n in cfg.robot_counts:
            sc = ab_scenario(col, n, params, cfg)
            row, _ = _row("ab", arch, 0 if arch == "cloud" else 1, n, col, sc)
            rows.append(row)
            hashes.append(scenario_hash(sc))
    return ResultTable(rows, _metadata(cfg.seed, _digest(hashes)))


def run_experiment_c(cfg: CConfig = CConfig(), calibrated: Optional[Calibrated] = None) -> ResultTable:
    calibrated = calibrated or calibrate_c(cfg)
    rows, hashes = [], []
    for f in cfg.frs_counts:
        sc = c_fr_scenario(f, calibrated.params["FR"], cfg)
        row, _ = _row("c", "C", f, f * ROBOTS_PER_FRS, "FR", sc)
        rows.append(row)
        hashes.append(scenario_hash(sc))
    for region in cfg.regions:
        for f in cfg.frs_counts:
            sc = c_cloud_scenario(region, f, calibrated.params[region], cfg)
            row, _ = _row("c", "cloud", f, f * ROBOTS_PER_FRS, region, sc)
            rows.append(row)
            hashes.append(scenario_hash(sc))
    return ResultTable(rows, _metadata(cfg.seed, _digest(hashes)))


def _digest(hashes):
    import hashlib

    return hashlib.sha256("".join(hashes).encode()).hexdigest()[:16]


def coefficient_of_variation(values):
    values = list(values)
    mean = statistics.fmean(values)
    return statistics.pstdev(values) / mean if mean else 0.0


# rescue-robot scenario

RESCUE_SITES = 3


def rescue_preset(force_cloud: Optional[str] = None, prewarm: bool = False, seed: int = 7) -> Scenario:
    """Three fog sites along a corridor, four rescue robots each.

    Workload classes: shared map tiles (large responses, a hot subset every
    robot touches), victim detection (image up, verdict down, 150 ms
    deadline) and periodic telemetry streaming. One robot walks from the
    first site to the second mid-run and is handed over; the extra load
    pushes that site past the surge threshold. ``force_cloud``
    bypasses the fog tier and sends everything to that cloud region.
    """
    sites = [
        NodeSpec(f"frs{i + 1}", Role.FRS, Position(100.0 * i, 0.0), service_time_ms=4.0,
                 parallel_servers=2, cache_capacity=32, coverage_radius_m=60.0)
        for i in range(RESCUE_SITES)
    ]
    robots = []
    for i, site in enumerate(sites):
        for j, p in enumerate(_ring(4, 15.0, centre=(site.position.x, 0.0), phase=0.4)):
            robots.append(NodeSpec(f"rescue{i + 1}-{j + 1}", Role.ROBOT, p))
    cloud = NodeSpec("cloud-Sydney", Role.CLOUD, service_time_ms=20.0, parallel_servers=8)
    workloads = (
        WorkloadSpec(FixedInterval(500.0, phase_spread=True), 10_000.0, key_universe=16,
                     key_distribution=Hot(0.25, 0.8), request_bytes=2_000, response_bytes=200_000,
                     name="map"),
        WorkloadSpec(Poisson(2.0), 10_000.0, key_universe=8, request_bytes=50_000, response_bytes=256,
                     deadline_ms=150.0, name="victim"),
        WorkloadSpec(FixedInterval(100.0, phase_spread=True), 10_000.0, key_universe=4,
                     request_bytes=10_000, response_bytes=64, name="stream"),
    )
    mobility = (("rescue1-1", (Waypoint(3_000.0, Position(55.0, 5.0)), Waypoint(6_000.0, Position(90.0, 5.0)))),)
    if force_cloud is not None:
        cloud = NodeSpec(f"cloud-{force_cloud}", Role.CLOUD, service_time_ms=20.0, parallel_servers=8)
        return Scenario(
            nodes=tuple(robots) + (cloud,), links=(), policy=CloudOnly(), seed=seed,
            workloads=workloads,
            link_defaults=(LinkDefault((Role.ROBOT, Role.CLOUD), cloud_link_model(force_cloud), 2_500_000.0),),
            mobility=mobility, name=f"rescue-cloud-{force_cloud}",
        )
    adjacency = tuple((sites[i].id, sites[i + 1].id) for i in range(RESCUE_SITES - 1))
    return Scenario(
        nodes=tuple(robots) + tuple(sites) + (cloud,), links=(), policy=CaseC(adjacency), seed=seed,
        workloads=workloads,
        link_defaults=(
            LinkDefault((Role.ROBOT, Role.FRS), Constant(1.0), 12_500_000.0),
            LinkDefault((Role.FRS, Role.FRS), Constant(2.0), 125_000_000.0),
            LinkDefault((Role.FRS, Role.CLOUD), cloud_link_model("Sydney"), 2_500_000.0),
        ),
        mobility=mobility, prewarm=prewarm, name="rescue-fr",
        # a site normally sees about 56 requests/s; the walker lifts one to about 70
        surge=SurgeMonitor(1000.0, 65.0, 0.5),
    )


def run_rescue(seed: int = 7) -> ResultTable:
    rows, hashes = [], []
    for label, sc in (("FR", rescue_preset(seed=seed)), ("SaoPaulo", rescue_preset("SaoPaulo", seed=seed))):
        arch = "C" if label == "FR" else "cloud"
        frs = RESCUE_SITES if label == "FR" else 0
        row, _ = _row("rescue", arch, frs, len(sc.robots()), label, sc)
        rows.append(row)
        hashes.append(scenario_hash(sc))
    return ResultTable(rows, _metadata(seed, _digest(hashes)))
