"""Deterministic discrete-event execution of a scenario.

Events are ordered by (time_ms, seq) where seq is a global insertion
counter, so simultaneous events always replay in the same order.
"""

from __future__ import annotations

import hashlib
import heapq
from collections import defaultdict, deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple

from .model import Role, hop_delay
from .rng import ALGORITHM, Xoshiro256
from .routing import (
    AlreadySpawned, RoutePlan, check_surge, handover, plan_route, spawn_sfrs,
)
from .scenario import Scenario, check
from .stats import LatencyStats, summarize


class EventKind(str, Enum):
    REQUEST_ISSUED = "RequestIssued"
    HOP_ARRIVED = "HopArrived"
    SERVICE_STARTED = "ServiceStarted"
    SERVICE_FINISHED = "ServiceFinished"
    ROBOT_MOVED = "RobotMoved"
    HANDOVER_COMPLETED = "HandoverCompleted"
    SFRS_SPAWNED = "SfrsSpawned"
    SIMULATION_END = "SimulationEnd"


@dataclass(frozen=True)
class Event:
    time_ms: float
    seq: int
    kind: EventKind
    request_id: Optional[int] = None
    node: Optional[str] = None
    data: object = None

    def sort_key(self):
        return (self.time_ms, self.seq)


class EventQueue:
    def __init__(self):
        self._heap = []
        self._seq = 0

    def push(self, time_ms, kind, request_id=None, node=None, data=None) -> Event:
        ev = Event(time_ms, self._seq, kind, request_id, node, data)
        self._seq += 1
        heapq.heappush(self._heap, (ev.time_ms, ev.seq, ev))
        return ev

    def pop(self) -> Event:
        return heapq.heappop(self._heap)[2]

    def __len__(self):
        return len(self._heap)


@dataclass
class ServerState:
    node: str
    parallel_servers: int
    busy: int = 0
    fifo_queue: deque = field(default_factory=deque)
    arrival_order: List[int] = field(default_factory=list)
    start_order: List[int] = field(default_factory=list)


def enqueue_for_service(state: ServerState, request_id, now=None) -> Optional[int]:
    """Admit an arrival; return its id if a server is free to start it now."""
    state.arrival_order.append(request_id)
    if state.busy < state.parallel_servers:
        state.busy += 1
        state.start_order.append(request_id)
        return request_id
    state.fifo_queue.append(request_id)
    return None


def release_server(state: ServerState) -> Optional[int]:
    """Free one server; hand it straight to the head of the queue if any."""
    if state.fifo_queue:
        nxt = state.fifo_queue.popleft()
        state.start_order.append(nxt)
        return nxt
    state.busy -= 1
    return None


@dataclass
class RequestRecord:
    request_id: int
    origin: str
    data_key: str
    issue_ms: float
    deadline_ms: Optional[float] = None
    workload: str = ""
    route: Tuple[str, ...] = ()
    resolution: Optional[str] = None
    hop_delays: List[float] = field(default_factory=list)
    queue_wait_ms: float = 0.0
    complete_ms: Optional[float] = None
    drop_reason: Optional[str] = None

    @property
    def latency_ms(self):
        return None if self.complete_ms is None else self.complete_ms - self.issue_ms

    @property
    def status(self):
        if self.complete_ms is not None:
            return "completed"
        if self.drop_reason is not None:
            return "dropped"
        return "inflight"

    def line(self):
        if self.complete_ms is not None:
            outcome = repr(self.complete_ms)
        elif self.drop_reason is not None:
            outcome = f"DROPPED:{self.drop_reason}"
        else:
            outcome = "INFLIGHT"
        return ",".join([
            str(self.request_id), repr(self.issue_ms), "/".join(self.route), outcome,
            repr(self.queue_wait_ms), str(len(self.hop_delays)),
        ])


@dataclass
class Trace:
    records: List[RequestRecord]
    seed: int
    config_hash: str
    prng: str = ALGORITHM
    service_log: Dict[str, Tuple[List[int], List[int]]] = field(default_factory=dict)
    events_processed: int = 0
    spawned: Dict[str, str] = field(default_factory=dict)
    handovers: List[Tuple[float, str, str, str]] = field(default_factory=list)

    def metadata_line(self):
        return f"# seed={self.seed} config_hash={self.config_hash} prng={self.prng}"

    def serialize(self) -> str:
        lines = [self.metadata_line(), "request_id,issue_ms,route,complete_ms,queue_wait_ms,hops"]
        lines.extend(r.line() for r in self.records)
        return "\n".join(lines) + "\n"

    def counts(self):
        out = {"issued": len(self.records), "completed": 0, "dropped": 0, "inflight": 0}
        for r in self.records:
            out[r.status] += 1
        return out


def scenario_hash(scenario: Scenario) -> str:
    from .config import dump_config

    return hashlib.sha256(dump_config(scenario).encode()).hexdigest()[:16]


@dataclass
class _Flight:
    request: object
    plan: RoutePlan
    record: RequestRecord
    hop: int = -1
    arrived_ms: float = 0.0


class Simulation:
    """One run of a scenario. Use :func:`run` unless you need the internals."""

    def __init__(self, scenario: Scenario, config_hash: Optional[str] = None):
        check(scenario)
        self.scenario = scenario
        self.topology = scenario.topology()
        self.rng = Xoshiro256(scenario.seed)
        self.queue = EventQueue()
        self.servers: Dict[str, ServerState] = {}
        self.flights: Dict[int, _Flight] = {}
        self.records: List[RequestRecord] = []
        self.frs_arrivals: Dict[str, deque] = defaultdict(deque)
        self.pending_handover: Dict[str, Tuple[int, str]] = {}
        self.handover_gen: Dict[str, int] = defaultdict(int)
        self.handovers = []
        self.now = 0.0
        self.processed = 0
        self.config_hash = config_hash or scenario_hash(scenario)
        for node in self.topology.nodes.values():
            self._server(node.id)

    def _server(self, node_id) -> ServerState:
        state = self.servers.get(node_id)
        if state is None:
            spec = self.topology.nodes[node_id]
            state = ServerState(node_id, spec.parallel_servers)
            self.servers[node_id] = state
        return state

    def schedule_initial(self):
        for req in self.scenario.build_requests():
            rec = RequestRecord(req.id, req.origin, req.data_key, req.issue_time_ms,
                                req.deadline_ms, req.workload)
            self.records.append(rec)
            self.flights[req.id] = _Flight(req, None, rec)
            self.queue.push(req.issue_time_ms, EventKind.REQUEST_ISSUED, req.id)
        for robot, wps in self.scenario.mobility:
            for i, wp in enumerate(wps):
                self.queue.push(wp.time_ms, EventKind.ROBOT_MOVED, node=robot, data=wp.position)
        if self.scenario.duration_ms is not None:
            self.queue.push(self.scenario.duration_ms, EventKind.SIMULATION_END)

    def execute(self) -> Trace:
        self.schedule_initial()
        handlers = {
            EventKind.REQUEST_ISSUED: self._on_issue,
            EventKind.HOP_ARRIVED: self._on_arrival,
            EventKind.SERVICE_STARTED: self._on_service_start,
            EventKind.SERVICE_FINISHED: self._on_service_finish,
            EventKind.ROBOT_MOVED: self._on_move,
            EventKind.HANDOVER_COMPLETED: self._on_handover,
            EventKind.SFRS_SPAWNED: self._on_spawn,
        }
        while self.queue:
            ev = self.queue.pop()
            self.now = ev.time_ms
            self.processed += 1
            if ev.kind is EventKind.SIMULATION_END:
                break
            handlers[ev.kind](ev)
        return Trace(
            records=self.records,
            seed=self.scenario.seed,
            config_hash=self.config_hash,
            service_log={k: (list(s.arrival_order), list(s.start_order))
                         for k, s in sorted(self.servers.items()) if s.arrival_order},
            events_processed=self.processed,
            spawned=dict(self.topology.spawned),
            handovers=list(self.handovers),
        )

    # request lifecycle

    def _expired(self, flight: _Flight) -> bool:
        deadline = flight.request.deadline_ms
        return deadline is not None and self.now - flight.request.issue_time_ms > deadline

    def _drop(self, flight: _Flight, reason: str):
        flight.record.drop_reason = reason
        del self.flights[flight.request.id]

    def _depart(self, flight: _Flight, t_depart: float):
        flight.hop += 1
        frm, to, nbytes = flight.plan.hops[flight.hop]
        delay = hop_delay(self.topology.link(frm, to), nbytes, self.rng)
        flight.record.hop_delays.append(delay)
        self.queue.push(t_depart + delay, EventKind.HOP_ARRIVED, flight.request.id, node=to)

    def _on_issue(self, ev: Event):
        flight = self.flights[ev.request_id]
        req = flight.request
        server = None
        pending = self.pending_handover.get(req.origin)
        if pending is not None:
            server = pending[2]
        plan = plan_route(req, self.topology, self.scenario.policy, server=server)
        flight.plan = plan
        flight.record.route = plan.walk
        flight.record.resolution = plan.resolution.value
        self._depart(flight, self.now)

    def _on_arrival(self, ev: Event):
        flight = self.flights.get(ev.request_id)
        if flight is None:
            return
        plan, hop = flight.plan, flight.hop
        if hop == len(plan.hops) - 1:
            if self._expired(flight):
                self._drop(flight, "deadline")
            else:
                flight.record.complete_ms = self.now
                del self.flights[flight.request.id]
            return
        if self._expired(flight):
            self._drop(flight, "deadline")
            return
        node = ev.node
        if plan.fill_at == hop:
            self.topology.caches[plan.fill_node].put(flight.request.data_key)
        if hop == 0 and self.topology.nodes[node].role is Role.FRS:
            self._note_fog_arrival(node)
        if hop in plan.service_at:
            flight.arrived_ms = self.now
            started = enqueue_for_service(self._server(node), flight.request.id, self.now)
            if started is not None:
                self.queue.push(self.now, EventKind.SERVICE_STARTED, started, node=node)
        else:
            self._leave(flight)

    def _on_service_start(self, ev: Event):
        flight = self.flights.get(ev.request_id)
        if flight is None:
            return
        if self._expired(flight):
            self._drop(flight, "deadline")
            self._hand_on(ev.node)
            return
        flight.record.queue_wait_ms += self.now - flight.arrived_ms
        service = self.topology.nodes[ev.node].service_time_ms
        self.queue.push(self.now + service, EventKind.SERVICE_FINISHED, ev.request_id, node=ev.node)

    def _hand_on(self, node):
        nxt = release_server(self._server(node))
        if nxt is not None:
            self.queue.push(self.now, EventKind.SERVICE_STARTED, nxt, node=node)

    def _on_service_finish(self, ev: Event):
        self._hand_on(ev.node)
        self._leave(self.flights[ev.request_id])

    def _leave(self, flight: _Flight):
        t = self.now
        if flight.hop == flight.plan.turnaround and flight.plan.lag_ms:
            t = t + flight.plan.lag_ms
        self._depart(flight, t)

    # topology dynamics

    def _note_fog_arrival(self, frs):
        monitor = self.scenario.surge
        if monitor is None or frs in self.topology.spawned:
            return
        arrivals = self.frs_arrivals[frs]
        arrivals.append(self.now)
        while arrivals and arrivals[0] <= self.now - monitor.window_ms:
            arrivals.popleft()
        if check_surge(monitor, arrivals, self.now):
            self.queue.push(self.now, EventKind.SFRS_SPAWNED, node=frs)

    def _on_spawn(self, ev: Event):
        try:
            spawn_sfrs(ev.node, self.scenario.surge, self.topology)
        except AlreadySpawned:
            return
        self._server(self.topology.spawned[ev.node])

    def _on_move(self, ev: Event):
        robot = ev.node
        self.topology.positions[robot] = ev.data
        if robot not in self.topology.assignment:
            return
        pending = self.pending_handover.get(robot)
        current = self.topology.assignment[robot]
        target = handover(robot, current, self.topology, self.scenario.handover_hysteresis_m)
        if target is None:
            if pending is not None:
                # moved back: cancel the pending switch
                self.handover_gen[robot] += 1
                del self.pending_handover[robot]
            return
        if pending is not None and pending[1] == target:
            return
        self.handover_gen[robot] += 1
        gen = self.handover_gen[robot]
        self.pending_handover[robot] = (gen, target, current)
        self.queue.push(self.now + self.scenario.handover_delay_ms, EventKind.HANDOVER_COMPLETED,
                        node=robot, data=(gen, target))

    def _on_handover(self, ev: Event):
        robot = ev.node
        gen, target = ev.data
        if self.handover_gen[robot] != gen:
            return
        old = self.topology.assignment[robot]
        self.topology.assignment[robot] = target
        del self.pending_handover[robot]
        self.handovers.append((self.now, robot, old, target))


def stats_by_target(trace: Trace) -> Dict[str, LatencyStats]:
    groups: Dict[str, List[float]] = {}
    lost: Dict[str, int] = defaultdict(int)
    for rec in trace.records:
        for k in ["all"] + ([rec.resolution] if rec.resolution else []):
            samples = groups.setdefault(k, [])
            if rec.complete_ms is not None:
                samples.append(rec.latency_ms)
            elif rec.drop_reason is not None:
                lost[k] += 1
    groups.setdefault("all", [])
    return {k: summarize(groups[k], lost[k]) for k in sorted(groups)}


def run(scenario: Scenario, config_hash: Optional[str] = None):
    """Execute ``scenario`` and return ``(trace, stats_by_target)``."""
    trace = Simulation(scenario, config_hash).execute()
    return trace, stats_by_target(trace)
