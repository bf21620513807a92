"""Topology and request value types plus latency sampling arithmetic.

Units are fixed throughout the package: milliseconds, bytes, meters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional, Tuple, Union


class Role(str, Enum):
    ROBOT = "Robot"
    FRS = "FRS"
    SUBFRS = "SubFRS"
    CLOUD = "CloudRegion"

    @property
    def is_fog(self):
        return self in (Role.FRS, Role.SUBFRS)

    @property
    def serves(self):
        return self is not Role.ROBOT


@dataclass(frozen=True)
class Position:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"position must be finite, got ({self.x}, {self.y})")

    def distance_to(self, other: "Position") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


@dataclass(frozen=True)
class NodeSpec:
    """A robot, fog robot server, sub-server or cloud region.

    Robots normally carry no service queue. A robot that answers
    device-to-device lookups may be given a non-zero ``service_time_ms``;
    ``holds`` lists the data keys it can hand to nearby peers.
    """

    id: str
    role: Role
    position: Optional[Position] = None
    service_time_ms: float = 0.0
    parallel_servers: int = 1
    cache_capacity: int = 0
    coverage_radius_m: float = 0.0
    holds: Tuple[str, ...] = ()

    def __post_init__(self):
        if not self.id:
            raise ValueError("node id must be non-empty")
        if self.service_time_ms < 0 or not math.isfinite(self.service_time_ms):
            raise ValueError(f"{self.id}: service_time_ms must be >= 0")
        if self.parallel_servers < 1:
            raise ValueError(f"{self.id}: parallel_servers must be >= 1")
        if self.cache_capacity < 0:
            raise ValueError(f"{self.id}: cache_capacity must be >= 0")
        if self.coverage_radius_m < 0:
            raise ValueError(f"{self.id}: coverage_radius_m must be >= 0")
        if self.role is not Role.CLOUD and self.position is None:
            raise ValueError(f"{self.id}: {self.role.value} needs a position")

    def covers(self, pos: Position) -> bool:
        return self.position is not None and self.position.distance_to(pos) <= self.coverage_radius_m


@dataclass(frozen=True)
class Constant:
    ms: float

    def __post_init__(self):
        if self.ms < 0 or not math.isfinite(self.ms):
            raise ValueError(f"constant latency must be >= 0, got {self.ms}")

    @property
    def min_ms(self):
        return self.ms

    def scaled(self, k: float) -> "Constant":
        return Constant(self.ms * k)


@dataclass(frozen=True)
class Empirical:
    """Shifted exponential with mean ``avg_ms``, truncated at ``max_ms``."""

    min_ms: float
    avg_ms: float
    max_ms: float

    def __post_init__(self):
        if not (0 <= self.min_ms <= self.avg_ms <= self.max_ms):
            raise ValueError(
                f"empirical model needs 0 <= min <= avg <= max, got "
                f"({self.min_ms}, {self.avg_ms}, {self.max_ms})"
            )

    def scaled(self, k: float) -> "Empirical":
        return Empirical(self.min_ms * k, self.avg_ms * k, self.max_ms * k)

    @classmethod
    def from_round_trip(cls, min_rtt, avg_rtt, max_rtt) -> "Empirical":
        return cls(min_rtt / 2.0, avg_rtt / 2.0, max_rtt / 2.0)


LatencyModel = Union[Constant, Empirical]


@dataclass(frozen=True)
class LinkSpec:
    """Symmetric link; ``bandwidth_bytes_per_s`` of None means unlimited."""

    a: str
    b: str
    one_way: LatencyModel
    bandwidth_bytes_per_s: Optional[float] = None

    def __post_init__(self):
        if self.a == self.b:
            raise ValueError(f"link endpoints must differ, got {self.a!r} twice")
        if self.bandwidth_bytes_per_s is not None and not self.bandwidth_bytes_per_s > 0:
            raise ValueError("bandwidth must be positive or unlimited")

    @property
    def key(self):
        return link_key(self.a, self.b)


def link_key(a: str, b: str) -> Tuple[str, str]:
    return (a, b) if a <= b else (b, a)


@dataclass(frozen=True)
class Request:
    id: int
    origin: str
    data_key: str
    request_bytes: int
    response_bytes: int
    issue_time_ms: float
    deadline_ms: Optional[float] = None
    workload: str = ""

    def __post_init__(self):
        if self.issue_time_ms < 0:
            raise ValueError("issue_time_ms must be >= 0")
        if self.request_bytes < 0 or self.response_bytes < 0:
            raise ValueError("payload sizes must be >= 0")


# Per-region cloud round trips (min, avg, max) in ms as measured from the robot.
CLOUD_RTT_MS = {
    "Sydney": (32.19, 95.83, 405.8),
    "Seoul": (246.76, 261.85, 282.5),
    "SaoPaulo": (390.16, 534.68, 1116.9),
}


def sample_latency(model: LatencyModel, rng) -> float:
    if isinstance(model, Constant):
        return float(model.ms)
    lo, mean, hi = model.min_ms, model.avg_ms, model.max_ms
    if mean == lo or hi == lo:
        return float(lo)
    while True:
        v = lo + rng.exponential(mean - lo)
        if v <= hi:
            return v


def hop_delay(link: LinkSpec, payload_bytes: int, rng) -> float:
    if payload_bytes < 0:
        raise ValueError("payload_bytes must be >= 0")
    delay = sample_latency(link.one_way, rng)
    if link.bandwidth_bytes_per_s is not None:
        delay += 1000.0 * payload_bytes / link.bandwidth_bytes_per_s
    return delay


def scale_link(link: LinkSpec, k: float) -> LinkSpec:
    return replace(link, one_way=link.one_way.scaled(k))
