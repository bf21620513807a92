"""Request stream generation."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

from .model import Request
from .rng import Xoshiro256


@dataclass(frozen=True)
class FixedInterval:
    """One request per robot every ``interval_ms``.

    With ``phase_spread`` the robots are staggered evenly across the
    interval (robot i of n fires ``(n-1-i)/n`` of an interval early) so every
    robot still issues the same number of requests within the duration.
    """

    interval_ms: float
    phase_spread: bool = False

    def __post_init__(self):
        if not self.interval_ms > 0:
            raise ValueError("interval_ms must be > 0")


@dataclass(frozen=True)
class Poisson:
    rate_rps: float

    def __post_init__(self):
        if not self.rate_rps > 0:
            raise ValueError("rate_rps must be > 0")


@dataclass(frozen=True)
class Uniform:
    pass


@dataclass(frozen=True)
class Hot:
    fraction_hot: float
    hot_weight: float

    def __post_init__(self):
        if not 0 < self.fraction_hot <= 1:
            raise ValueError("fraction_hot must be in (0, 1]")
        if not 0 <= self.hot_weight <= 1:
            raise ValueError("hot_weight must be in [0, 1]")


@dataclass(frozen=True)
class WorkloadSpec:
    arrival: Union[FixedInterval, Poisson]
    duration_ms: float
    key_universe: int = 1
    key_distribution: Union[Uniform, Hot] = Uniform()
    request_bytes: int = 64
    response_bytes: int = 64
    deadline_ms: Optional[float] = None
    name: str = ""
    robots: Tuple[str, ...] = ()

    def __post_init__(self):
        if self.duration_ms < 0:
            raise ValueError("duration_ms must be >= 0")
        if self.key_universe < 1:
            raise ValueError("key_universe must be >= 1")
        if self.request_bytes < 0 or self.response_bytes < 0:
            raise ValueError("payload sizes must be >= 0")
        if self.deadline_ms is not None and self.deadline_ms < 0:
            raise ValueError("deadline_ms must be >= 0")

    @property
    def key_prefix(self):
        return f"{self.name}:" if self.name else "key-"

    def keys(self):
        return [f"{self.key_prefix}{k}" for k in range(self.key_universe)]


def _pick_key(spec: WorkloadSpec, rng: Xoshiro256) -> int:
    dist = spec.key_distribution
    if isinstance(dist, Hot):
        n_hot = max(1, math.ceil(dist.fraction_hot * spec.key_universe))
        n_cold = spec.key_universe - n_hot
        if n_cold == 0 or rng.random() < dist.hot_weight:
            return rng.randbelow(n_hot)
        return n_hot + rng.randbelow(n_cold)
    return rng.randbelow(spec.key_universe)


def _arrival_times(spec: WorkloadSpec, index: int, n_robots: int, rng: Xoshiro256):
    arrival = spec.arrival
    if isinstance(arrival, FixedInterval):
        t_int = arrival.interval_ms
        shift = (n_robots - 1 - index) * t_int / n_robots if arrival.phase_spread else 0.0
        k = 1
        while True:
            t = k * t_int - shift
            if t > spec.duration_ms:
                return
            yield t
            k += 1
    else:
        mean_gap = 1000.0 / arrival.rate_rps
        t = rng.exponential(mean_gap)
        while t <= spec.duration_ms:
            yield t
            t += rng.exponential(mean_gap)


def generate_workload(spec: WorkloadSpec, robots: Sequence[str], seed, *, start_id: int = 0,
                      stream: int = 0):
    """Deterministic, time-ordered request stream for ``robots``.

    Each robot draws from its own child stream of the seeded generator, so
    adding a robot never perturbs the requests of the others.
    """
    root = seed if isinstance(seed, Xoshiro256) else Xoshiro256(seed)
    pending = []
    for index, robot in enumerate(robots):
        rng = root.spawn((stream << 20) + index + 1)
        for t in _arrival_times(spec, index, len(robots), rng):
            key = f"{spec.key_prefix}{_pick_key(spec, rng)}"
            pending.append((t, index, robot, key))
    pending.sort(key=lambda p: (p[0], p[1]))
    return [
        Request(
            id=start_id + i,
            origin=robot,
            data_key=key,
            request_bytes=spec.request_bytes,
            response_bytes=spec.response_bytes,
            issue_time_ms=t,
            deadline_ms=spec.deadline_ms,
            workload=spec.name,
        )
        for i, (t, _, robot, key) in enumerate(pending)
    ]
