"""TOML scenario files.

Top-level keys: ``name``, ``seed`` (required), ``duration_ms``, ``prewarm``,
``handover_hysteresis_m``, ``handover_delay_ms``. Tables: ``[policy]``,
``[surge]``; arrays of tables: ``[[nodes]]``, ``[[links]]``,
``[[link_defaults]]``, ``[[workloads]]``, ``[[requests]]``, ``[[mobility]]``.
See ``configs/*.example`` and the README for complete files.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import List, Optional

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
import tomli_w

from .errors import ConfigError
from .model import Constant, Empirical, LinkSpec, NodeSpec, Position, Request, Role
from .routing import CaseA, CaseB, CaseC, CloudOnly, LinkDefault, SurgeMonitor
from .scenario import Scenario, Waypoint, validate
from .workload import FixedInterval, Hot, Poisson, Uniform, WorkloadSpec


@dataclass(frozen=True)
class Issue:
    field: str
    reason: str
    line: Optional[int] = None

    def __str__(self):
        if self.line is not None:
            return f"line {self.line}: {self.reason}"
        return f"{self.field}: {self.reason}"


class ConfigFileError(ConfigError):
    """Every problem found in a config file, not just the first."""

    def __init__(self, issues: List[Issue]):
        self.issues = list(issues)
        super().__init__("; ".join(str(i) for i in self.issues))


class _Reader:
    def __init__(self):
        self.issues: List[Issue] = []

    def fail(self, field, reason):
        self.issues.append(Issue(field, reason))

    def get(self, table, key, path, kind, default=..., required=False):
        if key not in table:
            if required or default is ...:
                self.fail(f"{path}.{key}".lstrip("."), "missing required field")
                return None
            return default
        value = table[key]
        try:
            if kind is float:
                if isinstance(value, bool) or not isinstance(value, (int, float)):
                    raise TypeError
                return float(value)
            if kind is int:
                if isinstance(value, bool) or not isinstance(value, int):
                    raise TypeError
                return value
            if kind is bool:
                if not isinstance(value, bool):
                    raise TypeError
                return value
            if kind is str:
                if not isinstance(value, str):
                    raise TypeError
                return value
            if kind is list:
                if not isinstance(value, list):
                    raise TypeError
                return value
            if kind is dict:
                if not isinstance(value, dict):
                    raise TypeError
                return value
        except TypeError:
            self.fail(f"{path}.{key}".lstrip("."), f"expected {kind.__name__}, got {type(value).__name__}")
            return None
        return value

    def build(self, path, factory, *args, **kwargs):
        try:
            return factory(*args, **kwargs)
        except (ValueError, TypeError) as exc:
            self.fail(path, str(exc))
            return None


def _latency(rd: _Reader, table, path):
    if not isinstance(table, dict):
        rd.fail(path, "expected a table such as {constant = 1.0} or {min = .., avg = .., max = ..}")
        return None
    if "constant" in table:
        ms = rd.get(table, "constant", path, float)
        return None if ms is None else rd.build(path, Constant, ms)
    lo = rd.get(table, "min", path, float, required=True)
    avg = rd.get(table, "avg", path, float, required=True)
    hi = rd.get(table, "max", path, float, required=True)
    if None in (lo, avg, hi):
        return None
    return rd.build(path, Empirical, lo, avg, hi)


def _position(rd: _Reader, value, path):
    if value is None:
        return None
    if not (isinstance(value, list) and len(value) == 2
            and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value)):
        rd.fail(path, "expected [x, y]")
        return None
    return rd.build(path, Position, float(value[0]), float(value[1]))


def _role(rd: _Reader, value, path):
    try:
        return Role(value)
    except ValueError:
        rd.fail(path, f"unknown role {value!r} (expected one of {', '.join(r.value for r in Role)})")
        return None


def _policy(rd: _Reader, table):
    kind = rd.get(table, "kind", "policy", str, required=True)
    if kind is None:
        return None
    if kind == "A":
        return CaseA()
    if kind == "B":
        rng_m = rd.get(table, "d2d_range_m", "policy", float, required=True)
        lag = rd.get(table, "d2d_internal_lag_ms", "policy", float, 2.0)
        if None in (rng_m, lag):
            return None
        return rd.build("policy", CaseB, rng_m, lag)
    if kind == "C":
        pairs = rd.get(table, "adjacency", "policy", list, [])
        if pairs is None:
            return None
        ok = []
        for i, pair in enumerate(pairs):
            if not (isinstance(pair, list) and len(pair) == 2 and all(isinstance(p, str) for p in pair)):
                rd.fail(f"policy.adjacency[{i}]", "expected a pair of node ids")
                continue
            ok.append(tuple(pair))
        return rd.build("policy.adjacency", CaseC, tuple(ok))
    if kind == "cloud":
        return CloudOnly()
    rd.fail("policy.kind", f"unknown policy {kind!r} (expected A, B, C or cloud)")
    return None


def _node(rd: _Reader, t, path):
    node_id = rd.get(t, "id", path, str, required=True)
    role = rd.get(t, "role", path, str, required=True)
    role = _role(rd, role, f"{path}.role") if role is not None else None
    pos = _position(rd, t.get("position"), f"{path}.position")
    service = rd.get(t, "service_time_ms", path, float, 0.0)
    servers = rd.get(t, "parallel_servers", path, int, 1)
    cap = rd.get(t, "cache_capacity", path, int, 0)
    radius = rd.get(t, "coverage_radius_m", path, float, 0.0)
    holds = rd.get(t, "holds", path, list, [])
    if holds is not None and not all(isinstance(h, str) for h in holds):
        rd.fail(f"{path}.holds", "expected a list of data keys")
        holds = None
    if None in (node_id, role, service, servers, cap, radius, holds):
        return None
    return rd.build(path, NodeSpec, node_id, role, pos, service, servers, cap, radius, tuple(holds))


def _bandwidth(rd: _Reader, t, path):
    return rd.get(t, "bandwidth_bytes_per_s", path, float, None)


def _workload(rd: _Reader, t, path):
    arrival_t = rd.get(t, "arrival", path, dict, required=True)
    arrival = None
    if arrival_t is not None:
        if "interval_ms" in arrival_t:
            iv = rd.get(arrival_t, "interval_ms", f"{path}.arrival", float)
            spread = rd.get(arrival_t, "phase_spread", f"{path}.arrival", bool, False)
            if iv is not None and spread is not None:
                arrival = rd.build(f"{path}.arrival", FixedInterval, iv, spread)
        elif "rate_rps" in arrival_t:
            rate = rd.get(arrival_t, "rate_rps", f"{path}.arrival", float)
            if rate is not None:
                arrival = rd.build(f"{path}.arrival", Poisson, rate)
        else:
            rd.fail(f"{path}.arrival", "expected interval_ms or rate_rps")
    duration = rd.get(t, "duration_ms", path, float, required=True)
    universe = rd.get(t, "key_universe", path, int, 1)
    dist_v = t.get("key_distribution", "uniform")
    dist = None
    if dist_v == "uniform":
        dist = Uniform()
    elif isinstance(dist_v, dict):
        fh = rd.get(dist_v, "fraction_hot", f"{path}.key_distribution", float, required=True)
        hw = rd.get(dist_v, "hot_weight", f"{path}.key_distribution", float, required=True)
        if None not in (fh, hw):
            dist = rd.build(f"{path}.key_distribution", Hot, fh, hw)
    else:
        rd.fail(f"{path}.key_distribution", 'expected "uniform" or {fraction_hot, hot_weight}')
    req_b = rd.get(t, "request_bytes", path, int, 64)
    resp_b = rd.get(t, "response_bytes", path, int, 64)
    deadline = rd.get(t, "deadline_ms", path, float, None)
    name = rd.get(t, "name", path, str, "")
    robots = rd.get(t, "robots", path, list, [])
    if None in (arrival, duration, universe, dist, req_b, resp_b, name, robots):
        return None
    return rd.build(path, WorkloadSpec, arrival, duration, universe, dist, req_b, resp_b,
                    deadline, name, tuple(robots))


def _tables(rd: _Reader, doc, key):
    value = doc.get(key, [])
    if not isinstance(value, list) or not all(isinstance(v, dict) for v in value):
        rd.fail(key, "expected an array of tables")
        return []
    return value


def parse_config(text: str) -> Scenario:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ConfigFileError([Issue("syntax", str(exc), int(m.group(1)) if m else None)]) from None
    rd = _Reader()
    seed = rd.get(doc, "seed", "", int, required=True)
    if seed is not None and not 0 <= seed < 2 ** 64:
        rd.fail("seed", "must fit in 64 bits")
    policy_t = rd.get(doc, "policy", "", dict, required=True)
    policy = _policy(rd, policy_t) if policy_t is not None else None

    nodes = [_node(rd, t, f"nodes[{i}]") for i, t in enumerate(_tables(rd, doc, "nodes"))]
    links = []
    for i, t in enumerate(_tables(rd, doc, "links")):
        path = f"links[{i}]"
        a = rd.get(t, "a", path, str, required=True)
        b = rd.get(t, "b", path, str, required=True)
        model = _latency(rd, t.get("one_way"), f"{path}.one_way") if "one_way" in t else rd.fail(f"{path}.one_way", "missing required field")
        bw = _bandwidth(rd, t, path)
        if None not in (a, b, model):
            links.append(rd.build(path, LinkSpec, a, b, model, bw))
    defaults = []
    for i, t in enumerate(_tables(rd, doc, "link_defaults")):
        path = f"link_defaults[{i}]"
        roles = rd.get(t, "roles", path, list, required=True)
        model = _latency(rd, t.get("one_way"), f"{path}.one_way")
        bw = _bandwidth(rd, t, path)
        if roles is not None and len(roles) != 2:
            rd.fail(f"{path}.roles", "expected two roles")
            roles = None
        if roles is not None:
            roles = tuple(_role(rd, r, f"{path}.roles") for r in roles)
        if roles is not None and None not in roles and model is not None:
            defaults.append(rd.build(path, LinkDefault, roles, model, bw))
    workloads = [_workload(rd, t, f"workloads[{i}]") for i, t in enumerate(_tables(rd, doc, "workloads"))]
    requests = []
    for i, t in enumerate(_tables(rd, doc, "requests")):
        path = f"requests[{i}]"
        origin = rd.get(t, "origin", path, str, required=True)
        key = rd.get(t, "data_key", path, str, required=True)
        issue = rd.get(t, "issue_time_ms", path, float, required=True)
        rq = rd.get(t, "request_bytes", path, int, 64)
        rs = rd.get(t, "response_bytes", path, int, 64)
        deadline = rd.get(t, "deadline_ms", path, float, None)
        wl = rd.get(t, "workload", path, str, "")
        if None not in (origin, key, issue, rq, rs, wl):
            requests.append(rd.build(path, Request, i, origin, key, rq, rs, issue, deadline, wl))
    surge = None
    if "surge" in doc:
        st = rd.get(doc, "surge", "", dict)
        if st is not None:
            w = rd.get(st, "window_ms", "surge", float, 1000.0)
            th = rd.get(st, "threshold_rps", "surge", float, required=True)
            fr = rd.get(st, "reassignment_fraction", "surge", float, 0.5)
            if None not in (w, th, fr):
                surge = rd.build("surge", SurgeMonitor, w, th, fr)
    mobility = []
    for i, t in enumerate(_tables(rd, doc, "mobility")):
        path = f"mobility[{i}]"
        robot = rd.get(t, "robot", path, str, required=True)
        wps_t = rd.get(t, "waypoints", path, list, required=True)
        wps = []
        for j, w in enumerate(wps_t or []):
            wpath = f"{path}.waypoints[{j}]"
            if not isinstance(w, dict):
                rd.fail(wpath, "expected {time_ms, position}")
                continue
            tm = rd.get(w, "time_ms", wpath, float, required=True)
            pos = _position(rd, w.get("position"), f"{wpath}.position") if "position" in w else rd.fail(f"{wpath}.position", "missing required field")
            if tm is not None and pos is not None:
                wps.append(Waypoint(tm, pos))
        if robot is not None:
            mobility.append((robot, tuple(wps)))
    duration = rd.get(doc, "duration_ms", "", float, None)
    prewarm = rd.get(doc, "prewarm", "", bool, False)
    hyst = rd.get(doc, "handover_hysteresis_m", "", float, 5.0)
    hdelay = rd.get(doc, "handover_delay_ms", "", float, 50.0)
    name = rd.get(doc, "name", "", str, "")

    if rd.issues or None in nodes or None in links or None in workloads or None in requests \
            or None in defaults or policy is None:
        raise ConfigFileError(rd.issues or [Issue("config", "invalid config")])
    scenario = Scenario(
        nodes=tuple(nodes), links=tuple(links), policy=policy, seed=seed,
        workloads=tuple(workloads), requests=tuple(requests), link_defaults=tuple(defaults),
        surge=surge, mobility=tuple(mobility), duration_ms=duration, prewarm=prewarm,
        handover_hysteresis_m=hyst, handover_delay_ms=hdelay, name=name,
    )
    problems = validate(scenario)
    if problems:
        raise ConfigFileError([Issue("scenario", p) for p in problems])
    return scenario


def load_config(path) -> Scenario:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except (OSError, UnicodeDecodeError) as exc:
        raise ConfigFileError([Issue("file", f"cannot read {path}: {exc}")]) from None
    return parse_config(text)


def _latency_table(model):
    if isinstance(model, Constant):
        return {"constant": model.ms}
    return {"min": model.min_ms, "avg": model.avg_ms, "max": model.max_ms}


def _drop_none(d):
    return {k: v for k, v in d.items() if v is not None}


def to_document(s: Scenario) -> dict:
    doc = {"name": s.name, "seed": s.seed}
    if s.duration_ms is not None:
        doc["duration_ms"] = s.duration_ms
    doc["prewarm"] = s.prewarm
    doc["handover_hysteresis_m"] = s.handover_hysteresis_m
    doc["handover_delay_ms"] = s.handover_delay_ms
    p = s.policy
    if isinstance(p, CaseA):
        doc["policy"] = {"kind": "A"}
    elif isinstance(p, CaseB):
        doc["policy"] = {"kind": "B", "d2d_range_m": p.d2d_range_m, "d2d_internal_lag_ms": p.d2d_internal_lag_ms}
    elif isinstance(p, CaseC):
        doc["policy"] = {"kind": "C", "adjacency": [list(pair) for pair in p.adjacency]}
    else:
        doc["policy"] = {"kind": "cloud"}
    if s.surge is not None:
        doc["surge"] = {"window_ms": s.surge.window_ms, "threshold_rps": s.surge.threshold_rps,
                        "reassignment_fraction": s.surge.reassignment_fraction}
    doc["nodes"] = [
        _drop_none({
            "id": n.id, "role": n.role.value,
            "position": [n.position.x, n.position.y] if n.position is not None else None,
            "service_time_ms": n.service_time_ms, "parallel_servers": n.parallel_servers,
            "cache_capacity": n.cache_capacity, "coverage_radius_m": n.coverage_radius_m,
            "holds": list(n.holds),
        })
        for n in s.nodes
    ]
    if s.links:
        doc["links"] = [
            _drop_none({"a": l.a, "b": l.b, "one_way": _latency_table(l.one_way),
                        "bandwidth_bytes_per_s": l.bandwidth_bytes_per_s})
            for l in s.links
        ]
    if s.link_defaults:
        doc["link_defaults"] = [
            _drop_none({"roles": [r.value for r in d.roles], "one_way": _latency_table(d.one_way),
                        "bandwidth_bytes_per_s": d.bandwidth_bytes_per_s})
            for d in s.link_defaults
        ]
    if s.workloads:
        wls = []
        for w in s.workloads:
            if isinstance(w.arrival, FixedInterval):
                arrival = {"interval_ms": w.arrival.interval_ms, "phase_spread": w.arrival.phase_spread}
            else:
                arrival = {"rate_rps": w.arrival.rate_rps}
            if isinstance(w.key_distribution, Hot):
                dist = {"fraction_hot": w.key_distribution.fraction_hot,
                        "hot_weight": w.key_distribution.hot_weight}
            else:
                dist = "uniform"
            wls.append(_drop_none({
                "name": w.name, "arrival": arrival, "duration_ms": w.duration_ms,
                "key_universe": w.key_universe, "key_distribution": dist,
                "request_bytes": w.request_bytes, "response_bytes": w.response_bytes,
                "deadline_ms": w.deadline_ms, "robots": list(w.robots),
            }))
        doc["workloads"] = wls
    if s.requests:
        doc["requests"] = [
            _drop_none({"origin": r.origin, "data_key": r.data_key, "issue_time_ms": r.issue_time_ms,
                        "request_bytes": r.request_bytes, "response_bytes": r.response_bytes,
                        "deadline_ms": r.deadline_ms, "workload": r.workload})
            for r in s.requests
        ]
    if s.mobility:
        doc["mobility"] = [
            {"robot": robot, "waypoints": [
                {"time_ms": w.time_ms, "position": [w.position.x, w.position.y]} for w in wps]}
            for robot, wps in s.mobility
        ]
    return doc


def dump_config(scenario: Scenario) -> str:
    return tomli_w.dumps(to_document(scenario))
