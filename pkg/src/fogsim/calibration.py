"""Fit unspecified simulation parameters to quoted endpoint latencies.

Each knob is bisected against one target while earlier fits stay fixed.
Bisection stops once the metric is within ``precision`` (relative) of the
target, or after 60 iterations; every target is then re-checked against
its own tolerance, and any miss raises instead of returning a near-fit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, Optional, Sequence

from .engine import run
from .errors import CalibrationError, NonMonotone, Unbracketable
from .model import Role

MAX_ITERATIONS = 60


@dataclass(frozen=True)
class CalibrationTarget:
    """``build`` maps knob values to the scenario whose ``metric`` mean is fitted."""

    label: str
    build: Callable[[Dict[str, float]], object]
    target_ms: float
    tolerance_fraction: float = 0.05
    metric: str = "all"

    def __post_init__(self):
        if not self.target_ms > 0:
            raise ValueError("target_ms must be > 0")
        if not 0 < self.tolerance_fraction <= 1:
            raise ValueError("tolerance_fraction must be in (0, 1]")

    def within(self, value) -> bool:
        return value is not None and abs(value - self.target_ms) <= self.tolerance_fraction * self.target_ms


@dataclass(frozen=True)
class Knob:
    name: str
    lo: float
    hi: float
    integer: bool = False
    target: Optional[str] = None

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError(f"knob {self.name}: lo > hi")


@dataclass
class CalibrationResult:
    params: Dict[str, float]
    achieved: Dict[str, float]
    iterations: Dict[str, int] = field(default_factory=dict)

    def ok(self, targets):
        return all(t.within(self.achieved.get(t.label)) for t in targets)


def measure(target: CalibrationTarget, params) -> float:
    _, stats = run(target.build(params))
    s = stats.get(target.metric)
    if s is None or s.count == 0:
        raise CalibrationError(f"target {target.label!r}: no completed requests for metric {target.metric!r}")
    return s.mean_ms


def _fit_continuous(knob, target, params, precision):
    def f(x):
        return measure(target, {**params, knob.name: x})

    goal = target.target_ms
    band = min(precision, target.tolerance_fraction) * goal
    current = params.get(knob.name)
    if current is not None:
        fc = f(current)
        if abs(fc - goal) <= band:
            return current, fc, 0
    lo, hi = knob.lo, knob.hi
    f_lo, f_hi = f(lo), f(hi)
    if f_lo == f_hi:
        if abs(f_lo - goal) <= band:
            return lo, f_lo, 0
        raise NonMonotone(knob.name, f"metric is {f_lo:.6g} ms at both ends")
    if not min(f_lo, f_hi) <= goal <= max(f_lo, f_hi):
        raise Unbracketable(knob.name, f_lo, f_hi, goal)
    rising = f_hi > f_lo
    best = (abs(f_lo - goal), lo, f_lo) if abs(f_lo - goal) < abs(f_hi - goal) else (abs(f_hi - goal), hi, f_hi)
    slack = 1e-9 * max(abs(f_lo), abs(f_hi), 1.0)
    for it in range(1, MAX_ITERATIONS + 1):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm < min(f_lo, f_hi) - slack or fm > max(f_lo, f_hi) + slack:
            raise NonMonotone(knob.name, f"metric {fm:.6g} ms at {mid:.6g} leaves the endpoint range")
        if abs(fm - goal) < best[0]:
            best = (abs(fm - goal), mid, fm)
        if abs(fm - goal) <= band:
            return mid, fm, it
        if (fm < goal) == rising:
            lo = mid
        else:
            hi = mid
    return best[1], best[2], MAX_ITERATIONS


def _fit_integer(knob, target, params):
    def f(x):
        return measure(target, {**params, knob.name: x})

    goal = target.target_ms
    lo, hi = int(math.ceil(knob.lo)), int(math.floor(knob.hi))
    f_lo, f_hi = f(lo), f(hi)
    if f_lo == f_hi and lo != hi and not target.within(f_lo):
        raise NonMonotone(knob.name, f"metric is {f_lo:.6g} ms at both ends")
    rising = f_hi >= f_lo
    cache = {lo: f_lo, hi: f_hi}
    it = 0
    # smallest x whose metric has crossed the goal in the knob's direction
    while hi - lo > 1 and it < MAX_ITERATIONS:
        it += 1
        mid = (lo + hi) // 2
        cache[mid] = f(mid)
        if (cache[mid] < goal) == rising:
            lo = mid
        else:
            hi = mid
    x = min(cache, key=lambda k: (abs(cache[k] - goal), k))
    return x, cache[x], it


def calibrate(targets: Sequence[CalibrationTarget], knobs: Sequence[Knob], params=None,
              precision: float = 1e-4) -> CalibrationResult:
    """Fit ``knobs`` in order; knob i serves ``knob.target`` or else target i."""
    params = dict(params or {})
    by_label = {t.label: t for t in targets}
    iterations = {}
    for i, knob in enumerate(knobs):
        label = knob.target or (targets[i].label if i < len(targets) else targets[-1].label)
        target = by_label[label]
        if knob.integer:
            value, _, its = _fit_integer(knob, target, params)
        else:
            value, _, its = _fit_continuous(knob, target, params, precision)
        params[knob.name] = value
        iterations[knob.name] = its
    achieved = {t.label: measure(t, params) for t in targets}
    result = CalibrationResult(params, achieved, iterations)
    misses = [t for t in targets if not t.within(achieved[t.label])]
    if misses:
        detail = ", ".join(
            f"{t.label}: {achieved[t.label]:.4f} ms vs {t.target_ms} ms ±{t.tolerance_fraction:.0%}" for t in misses
        )
        err = CalibrationError(f"calibration missed {detail}")
        err.result = result
        raise err
    return result


def apply_knob(scenario, name: str, value):
    """Set a dotted knob on a scenario copy.

    Supported names: ``nodes.<id>.<field>``, ``role.<Role>.<field>`` (every
    node of that role) and ``workload.<field>`` (every workload). Changing
    ``workload.interval_ms`` stretches the duration with it, so each robot
    keeps issuing the same number of requests.
    """
    parts = name.split(".")
    if parts[0] == "nodes" and len(parts) == 3:
        _, node_id, attr = parts
        nodes = tuple(_set_node(n, attr, value) if n.id == node_id else n for n in scenario.nodes)
        if all(n.id != node_id for n in scenario.nodes):
            raise KeyError(f"unknown node {node_id!r} in knob {name!r}")
        return replace(scenario, nodes=nodes)
    if parts[0] == "role" and len(parts) == 3:
        role = Role(parts[1])
        nodes = tuple(_set_node(n, parts[2], value) if n.role is role else n for n in scenario.nodes)
        return replace(scenario, nodes=nodes)
    if parts[0] == "workload" and len(parts) == 2:
        attr = parts[1]
        out = []
        for w in scenario.workloads:
            if attr == "interval_ms":
                stretch = float(value) / w.arrival.interval_ms
                out.append(replace(w, arrival=replace(w.arrival, interval_ms=float(value)),
                                   duration_ms=w.duration_ms * stretch))
            elif attr == "rate_rps":
                out.append(replace(w, arrival=replace(w.arrival, rate_rps=float(value))))
            else:
                out.append(replace(w, **{attr: value}))
        return replace(scenario, workloads=tuple(out))
    raise KeyError(f"unsupported knob {name!r}")


def _set_node(node, attr, value):
    if attr in ("parallel_servers", "cache_capacity"):
        value = int(round(value))
    elif attr in ("service_time_ms", "coverage_radius_m"):
        value = float(value)
    else:
        raise KeyError(f"node field {attr!r} cannot be calibrated")
    return replace(node, **{attr: value})
