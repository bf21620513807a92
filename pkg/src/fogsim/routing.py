"""Route planning for the three fog-robotics architectures.

Case A sends every request to the robot's fog robot server (FRS), which
answers from its cache or fetches from the cloud. Case B first looks for a
nearby peer robot that already holds the data (device-to-device, D2D).
Case C lets an FRS borrow from an adjacent FRS before going to the cloud.
``CloudOnly`` is the cloud-robotics baseline with no fog tier at all.
"""

from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass, replace
from enum import Enum
from typing import Dict, List, Optional, Tuple

from .errors import AlreadySpawned, ConfigError, Uncovered
from .model import LinkSpec, NodeSpec, Position, Role, link_key


@dataclass(frozen=True)
class CaseA:
    pass


@dataclass(frozen=True)
class CaseB:
    d2d_range_m: float
    d2d_internal_lag_ms: float = 2.0

    def __post_init__(self):
        if self.d2d_range_m < 0:
            raise ValueError("d2d_range_m must be >= 0")
        if self.d2d_internal_lag_ms < 0:
            raise ValueError("d2d_internal_lag_ms must be >= 0")


@dataclass(frozen=True)
class CaseC:
    adjacency: Tuple[Tuple[str, str], ...] = ()

    def __post_init__(self):
        pairs = set()
        for a, b in self.adjacency:
            if a == b:
                raise ValueError(f"adjacency self-loop on {a!r}")
            pairs.add(link_key(a, b))
        # canonical form makes the relation symmetric by construction
        object.__setattr__(self, "adjacency", tuple(sorted(pairs)))


@dataclass(frozen=True)
class CloudOnly:
    pass


POLICY_NAMES = {CaseA: "A", CaseB: "B", CaseC: "C", CloudOnly: "cloud"}


class Resolution(str, Enum):
    FRS_CACHE_HIT = "FrsCacheHit"
    ADJACENT_FRS_HIT = "AdjacentFrsHit"
    CLOUD_FETCH = "CloudFetch"
    D2D = "D2D"


@dataclass(frozen=True)
class RoutePlan:
    """A closed walk from the origin robot and back.

    ``service_at`` lists hop indices whose arrival node serves the request,
    ``fill_at`` the hop whose arrival populates the local FRS cache, and
    ``lag_ms`` a fixed delay added after the last service.
    """

    hops: Tuple[Tuple[str, str, int], ...]
    serving_nodes: Tuple[str, ...]
    resolution: Resolution
    service_at: Tuple[int, ...] = ()
    fill_at: Optional[int] = None
    fill_node: Optional[str] = None
    lag_ms: float = 0.0

    @property
    def walk(self):
        return (self.hops[0][0],) + tuple(h[1] for h in self.hops)

    @property
    def turnaround(self):
        return self.service_at[-1] if self.service_at else 0


class Cache:
    """LRU set of data keys; the most recently used key sits last."""

    def __init__(self, capacity: int, keys=()):
        if capacity < 0:
            raise ValueError("capacity must be >= 0")
        self.capacity = capacity
        self._entries: "OrderedDict[str, None]" = OrderedDict()
        for k in keys:
            self.put(k)

    def get(self, key) -> bool:
        if key in self._entries:
            self._entries.move_to_end(key)
            return True
        return False

    def put(self, key):
        """Insert or refresh ``key``; returns the evicted key, if any."""
        if self.capacity == 0:
            return None
        if key in self._entries:
            self._entries.move_to_end(key)
            return None
        victim = None
        if len(self._entries) >= self.capacity:
            victim, _ = self._entries.popitem(last=False)
        self._entries[key] = None
        return victim

    def peek(self, key) -> bool:
        return key in self._entries

    def keys(self) -> List[str]:
        return list(self._entries)

    def __contains__(self, key):
        return key in self._entries

    def __len__(self):
        return len(self._entries)

    def __repr__(self):
        return f"Cache(capacity={self.capacity}, keys={self.keys()!r})"


def cache_get(cache: Cache, key) -> bool:
    return cache.get(key)


def cache_put(cache: Cache, key):
    return cache.put(key)


@dataclass(frozen=True)
class SurgeMonitor:
    window_ms: float = 1000.0
    threshold_rps: float = 10.0
    reassignment_fraction: float = 0.5

    def __post_init__(self):
        if not self.window_ms > 0:
            raise ValueError("window_ms must be > 0")
        if not self.threshold_rps > 0:
            raise ValueError("threshold_rps must be > 0")
        if not 0 < self.reassignment_fraction < 1:
            raise ValueError("reassignment_fraction must be in (0, 1)")


def check_surge(monitor: SurgeMonitor, arrivals, now: float) -> bool:
    lo = now - monitor.window_ms
    recent = sum(1 for t in arrivals if lo < t <= now)
    return recent / (monitor.window_ms / 1000.0) > monitor.threshold_rps


@dataclass(frozen=True)
class LinkDefault:
    """Fallback link for any node pair with these two roles."""

    roles: Tuple[Role, Role]
    one_way: object
    bandwidth_bytes_per_s: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "roles", tuple(sorted(self.roles, key=lambda r: r.value)))

    def matches(self, ra: Role, rb: Role):
        return tuple(sorted((ra, rb), key=lambda r: r.value)) == self.roles


class Topology:
    """Mutable system state consulted by the planner: nodes, links,
    robot positions and assignments, fog caches and adjacency."""

    def __init__(self, nodes, links=(), defaults=(), adjacency=()):
        self.nodes: Dict[str, NodeSpec] = {}
        for n in nodes:
            if n.id in self.nodes:
                raise ConfigError(f"duplicate node id {n.id!r}")
            self.nodes[n.id] = n
        self.links: Dict[Tuple[str, str], LinkSpec] = {}
        for link in links:
            self.links[link.key] = link
        self.defaults = list(defaults)
        self.positions: Dict[str, Position] = {
            n.id: n.position for n in self.nodes.values() if n.role is Role.ROBOT
        }
        self.assignment: Dict[str, str] = {}
        self.caches: Dict[str, Cache] = {
            n.id: Cache(n.cache_capacity) for n in self.nodes.values() if n.role.is_fog
        }
        self.adjacency = set(link_key(a, b) for a, b in adjacency)
        self.spawned: Dict[str, str] = {}

    def copy(self) -> "Topology":
        t = Topology.__new__(Topology)
        t.nodes = dict(self.nodes)
        t.links = dict(self.links)
        t.defaults = list(self.defaults)
        t.positions = dict(self.positions)
        t.assignment = dict(self.assignment)
        t.caches = {k: Cache(c.capacity, c.keys()) for k, c in self.caches.items()}
        t.adjacency = set(self.adjacency)
        t.spawned = dict(self.spawned)
        return t

    def find_link(self, a, b) -> Optional[LinkSpec]:
        link = self.links.get(link_key(a, b))
        if link is not None:
            return link
        ra, rb = self.nodes[a].role, self.nodes[b].role
        for d in self.defaults:
            if d.matches(ra, rb):
                return LinkSpec(a, b, d.one_way, d.bandwidth_bytes_per_s)
        return None

    def link(self, a, b) -> LinkSpec:
        found = self.find_link(a, b)
        if found is None:
            raise ConfigError(f"no link between {a!r} and {b!r}")
        return found

    def has_link(self, a, b):
        return self.find_link(a, b) is not None

    def fog_servers(self) -> List[NodeSpec]:
        return sorted((n for n in self.nodes.values() if n.role.is_fog), key=lambda n: n.id)

    def robots(self) -> List[str]:
        return sorted(n.id for n in self.nodes.values() if n.role is Role.ROBOT)

    def robots_of(self, server) -> List[str]:
        return sorted(r for r, s in self.assignment.items() if s == server)

    def cloud_for(self, node_id) -> str:
        clouds = sorted(
            n.id for n in self.nodes.values()
            if n.role is Role.CLOUD and self.has_link(node_id, n.id)
        )
        if not clouds:
            raise ConfigError(f"{node_id!r} has no link to any cloud region")
        return clouds[0]

    def neighbours(self, server) -> List[str]:
        out = []
        for a, b in self.adjacency:
            if a == server:
                out.append(b)
            elif b == server:
                out.append(a)
        return sorted(out)

    def assign_all(self):
        for r in self.robots():
            self.assignment[r] = assign_frs(r, self)


def _covering(topology: Topology, pos: Position):
    return [n for n in topology.fog_servers() if n.covers(pos)]


def assign_frs(robot, topology: Topology) -> str:
    pos = topology.positions[robot]
    candidates = _covering(topology, pos)
    if not candidates:
        raise Uncovered(robot)
    best = min(candidates, key=lambda n: (n.position.distance_to(pos), n.id))
    return best.id


def _fog_plan(request, topology: Topology, server, adjacent_lookup: bool) -> RoutePlan:
    robot, key = request.origin, request.data_key
    up, down = request.request_bytes, request.response_bytes
    if topology.caches[server].get(key):
        return RoutePlan(
            hops=((robot, server, up), (server, robot, down)),
            serving_nodes=(server,),
            resolution=Resolution.FRS_CACHE_HIT,
            service_at=(0,),
        )
    upstream, resolution = None, Resolution.CLOUD_FETCH
    if adjacent_lookup:
        for nb in topology.neighbours(server):
            if nb in topology.caches and topology.caches[nb].get(key):
                upstream, resolution = nb, Resolution.ADJACENT_FRS_HIT
                break
    if upstream is None:
        upstream = topology.cloud_for(server)
    return RoutePlan(
        hops=((robot, server, up), (server, upstream, up), (upstream, server, down), (server, robot, down)),
        serving_nodes=(server, upstream),
        resolution=resolution,
        service_at=(0, 1),
        fill_at=2,
        fill_node=server,
    )


def _d2d_peer(request, topology: Topology, rng_m: float) -> Optional[str]:
    here = topology.positions[request.origin]
    best = None
    for peer in topology.robots():
        if peer == request.origin:
            continue
        spec = topology.nodes[peer]
        if request.data_key not in spec.holds:
            continue
        d = topology.positions[peer].distance_to(here)
        # strict: a zero range never admits a peer, even a co-located one
        if d < rng_m and (best is None or (d, peer) < best):
            best = (d, peer)
    return best[1] if best else None


def plan_route(request, topology: Topology, policy, server: Optional[str] = None) -> RoutePlan:
    """Plan the walk for ``request`` under ``policy``.

    ``server`` overrides the robot's current assignment (the engine passes
    the pre-handover server while a handover is pending). Local cache
    lookups refresh LRU recency; cache population happens later, when the
    response passes back through the server.
    """
    robot = request.origin
    if isinstance(policy, CloudOnly):
        cloud = topology.cloud_for(robot)
        return RoutePlan(
            hops=((robot, cloud, request.request_bytes), (cloud, robot, request.response_bytes)),
            serving_nodes=(cloud,),
            resolution=Resolution.CLOUD_FETCH,
            service_at=(0,),
        )
    if isinstance(policy, CaseB):
        peer = _d2d_peer(request, topology, policy.d2d_range_m)
        if peer is not None:
            serves = topology.nodes[peer].service_time_ms > 0
            return RoutePlan(
                hops=((robot, peer, request.request_bytes), (peer, robot, request.response_bytes)),
                serving_nodes=(peer,) if serves else (),
                resolution=Resolution.D2D,
                service_at=(0,) if serves else (),
                lag_ms=policy.d2d_internal_lag_ms,
            )
    if server is None:
        server = topology.assignment.get(robot)
        if server is None:
            server = assign_frs(robot, topology)
            topology.assignment[robot] = server
    return _fog_plan(request, topology, server, adjacent_lookup=isinstance(policy, CaseC))


def spawn_sfrs(frs, monitor: SurgeMonitor, topology: Topology) -> Topology:
    """Add a sub-server under ``frs`` and move part of its robots onto it.

    The sub-server copies the parent's node parameters, sits at the
    centroid of the robots it takes over (farthest from the parent first),
    inherits every link of the parent, and reaches the parent itself over
    a link modelled like the parent's link to the first moved robot. It is
    adjacent to the parent, so under Case C a sub-server miss can be served
    from the parent's cache.
    """
    if frs in topology.spawned:
        raise AlreadySpawned(frs)
    parent = topology.nodes[frs]
    robots = topology.robots_of(frs)
    n_move = math.ceil(monitor.reassignment_fraction * len(robots)) if robots else 0
    ranked = sorted(robots, key=lambda r: (-topology.positions[r].distance_to(parent.position), r))
    moved = ranked[:n_move]
    if moved:
        cx = sum(topology.positions[r].x for r in moved) / len(moved)
        cy = sum(topology.positions[r].y for r in moved) / len(moved)
        centre = Position(cx, cy)
    else:
        centre = parent.position
    sub_id = f"{frs}.sub"
    sub = replace(parent, id=sub_id, role=Role.SUBFRS, position=centre, holds=())
    topology.nodes[sub_id] = sub
    topology.caches[sub_id] = Cache(sub.cache_capacity)

    for other in list(topology.nodes):
        if other in (frs, sub_id):
            continue
        base = topology.find_link(frs, other)
        if base is not None:
            topology.links[link_key(sub_id, other)] = LinkSpec(
                sub_id, other, base.one_way, base.bandwidth_bytes_per_s
            )
    template = topology.find_link(frs, moved[0]) if moved else None
    if template is not None:
        topology.links[link_key(sub_id, frs)] = LinkSpec(sub_id, frs, template.one_way, template.bandwidth_bytes_per_s)
        topology.adjacency.add(link_key(sub_id, frs))
    for r in moved:
        topology.assignment[r] = sub_id
    topology.spawned[frs] = sub_id
    return topology


def handover(robot, old_frs, topology: Topology, hysteresis_m: float = 5.0) -> Optional[str]:
    """Return the server ``robot`` should move to, or None to stay put."""
    pos = topology.positions[robot]
    old = topology.nodes[old_frs]
    candidates = _covering(topology, pos)
    if not candidates:
        raise Uncovered(robot)
    best = min(candidates, key=lambda n: (n.position.distance_to(pos), n.id))
    if best.id == old_frs:
        return None
    if not old.covers(pos):
        return best.id
    if old.position.distance_to(pos) - best.position.distance_to(pos) > hysteresis_m:
        return best.id
    return None
