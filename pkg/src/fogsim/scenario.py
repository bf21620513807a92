"""Scenario definition and pre-run validation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple, Union

from .errors import ConfigError
from .model import LinkSpec, NodeSpec, Position, Request, Role
from .routing import (
    CaseA, CaseB, CaseC, CloudOnly, LinkDefault, SurgeMonitor, Topology,
)
from .workload import WorkloadSpec, generate_workload

Policy = Union[CaseA, CaseB, CaseC, CloudOnly]


@dataclass(frozen=True)
class Waypoint:
    time_ms: float
    position: Position


@dataclass(frozen=True)
class Scenario:
    nodes: Tuple[NodeSpec, ...]
    links: Tuple[LinkSpec, ...]
    policy: Policy
    seed: int
    workloads: Tuple[WorkloadSpec, ...] = ()
    requests: Tuple[Request, ...] = ()
    link_defaults: Tuple[LinkDefault, ...] = ()
    surge: Optional[SurgeMonitor] = None
    mobility: Tuple[Tuple[str, Tuple[Waypoint, ...]], ...] = ()
    duration_ms: Optional[float] = None
    prewarm: bool = False
    handover_hysteresis_m: float = 5.0
    handover_delay_ms: float = 50.0
    name: str = ""

    def node(self, node_id) -> NodeSpec:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise KeyError(node_id)

    def robots(self):
        return [n.id for n in self.nodes if n.role is Role.ROBOT]

    def waypoints(self, robot):
        for r, wps in self.mobility:
            if r == robot:
                return wps
        return ()

    def all_keys(self):
        keys = []
        for w in self.workloads:
            keys.extend(w.keys())
        for r in self.requests:
            if r.data_key not in keys:
                keys.append(r.data_key)
        return keys

    def topology(self) -> Topology:
        adjacency = self.policy.adjacency if isinstance(self.policy, CaseC) else ()
        topo = Topology(self.nodes, self.links, self.link_defaults, adjacency)
        if not isinstance(self.policy, CloudOnly):
            topo.assign_all()
        if self.prewarm:
            keys = self.all_keys()
            for cache in topo.caches.values():
                for k in keys:
                    cache.put(k)
        return topo

    def build_requests(self):
        """Generated workload merged with explicit requests, re-numbered in issue order."""
        robots = self.robots()
        merged = []
        for stream, w in enumerate(self.workloads):
            for req in generate_workload(w, list(w.robots) or robots, self.seed, stream=stream):
                merged.append((req.issue_time_ms, stream, req.id, req))
        for i, req in enumerate(self.requests):
            merged.append((req.issue_time_ms, len(self.workloads), i, req))
        merged.sort(key=lambda m: m[:3])
        out = []
        for new_id, (_, _, _, req) in enumerate(merged):
            out.append(Request(new_id, req.origin, req.data_key, req.request_bytes,
                               req.response_bytes, req.issue_time_ms, req.deadline_ms, req.workload))
        return out


def validate(scenario: Scenario):
    """Return every problem found; an empty list means the scenario can run."""
    errors = []
    ids = [n.id for n in scenario.nodes]
    seen = set()
    for i in ids:
        if i in seen:
            errors.append(f"nodes: duplicate id {i!r}")
        seen.add(i)
    if errors:
        return errors
    nodes = {n.id: n for n in scenario.nodes}
    link_keys = set()
    for link in scenario.links:
        for end in (link.a, link.b):
            if end not in nodes:
                errors.append(f"links: {link.a}-{link.b} references unknown node {end!r}")
        if link.key in link_keys:
            errors.append(f"links: duplicate link {link.a}-{link.b}")
        link_keys.add(link.key)
    if errors:
        return errors

    topo = Topology(scenario.nodes, scenario.links, scenario.link_defaults)
    policy = scenario.policy
    robots = scenario.robots()
    fog = topo.fog_servers()

    if isinstance(policy, CaseC):
        for a, b in policy.adjacency:
            for end in (a, b):
                if end not in nodes or not nodes[end].role.is_fog:
                    errors.append(f"policy.adjacency: {end!r} is not a fog server")
            if a in nodes and b in nodes and not topo.has_link(a, b):
                errors.append(f"policy.adjacency: no link between {a!r} and {b!r}")

    for r in robots:
        positions = [nodes[r].position] + [w.position for w in scenario.waypoints(r)]
        if isinstance(policy, CloudOnly):
            if not any(n.role is Role.CLOUD and topo.has_link(r, n.id) for n in scenario.nodes):
                errors.append(f"robot {r!r}: no link to any cloud region")
            continue
        for pos in positions:
            covering = [s for s in fog if s.covers(pos)]
            if not covering:
                errors.append(f"robot {r!r}: position ({pos.x}, {pos.y}) is not covered by any fog server")
            for s in covering:
                if not topo.has_link(r, s.id):
                    errors.append(f"robot {r!r}: no link to covering fog server {s.id!r}")
        if isinstance(policy, CaseB):
            for other in robots:
                if other == r or not nodes[other].holds:
                    continue
                others = [nodes[other].position] + [w.position for w in scenario.waypoints(other)]
                near = any(p.distance_to(q) < policy.d2d_range_m for p in positions for q in others)
                if near and not topo.has_link(r, other):
                    errors.append(f"robot {r!r}: no link to D2D peer {other!r}")

    if not isinstance(policy, CloudOnly):
        for s in fog:
            if not any(n.role is Role.CLOUD and topo.has_link(s.id, n.id) for n in scenario.nodes):
                errors.append(f"fog server {s.id!r}: no link to any cloud region")

    for r, wps in scenario.mobility:
        if r not in nodes or nodes[r].role is not Role.ROBOT:
            errors.append(f"mobility: {r!r} is not a robot")
        times = [w.time_ms for w in wps]
        if times != sorted(times) or any(t < 0 for t in times):
            errors.append(f"mobility: waypoints of {r!r} must be non-negative and time-ordered")

    for w in scenario.workloads:
        for r in w.robots:
            if r not in nodes or nodes[r].role is not Role.ROBOT:
                errors.append(f"workload {w.name or '?'}: {r!r} is not a robot")
    for req in scenario.requests:
        if req.origin not in nodes or nodes[req.origin].role is not Role.ROBOT:
            errors.append(f"requests: origin {req.origin!r} is not a robot")
    if scenario.duration_ms is not None and scenario.duration_ms < 0:
        errors.append("duration_ms must be >= 0")
    return errors


def check(scenario: Scenario):
    errors = validate(scenario)
    if errors:
        raise ConfigError("; ".join(errors))
