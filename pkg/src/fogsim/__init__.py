"""Discrete-event simulator for fog-robotics task offloading, with a UDP/TCP
round-trip latency probe."""

from .engine import Trace, run
from .model import CLOUD_RTT_MS, Constant, Empirical, LinkSpec, NodeSpec, Position, Request, Role
from .model import hop_delay, sample_latency
from .routing import CaseA, CaseB, CaseC, CloudOnly, Resolution
from .scenario import Scenario
from .stats import LatencyStats, summarize

__all__ = [
    "CLOUD_RTT_MS", "CaseA", "CaseB", "CaseC", "CloudOnly", "Constant", "Empirical", "LatencyStats",
    "LinkSpec", "NodeSpec", "Position", "Request", "Resolution", "Role", "Scenario", "Trace",
    "hop_delay", "run", "sample_latency", "summarize",
]
__version__ = "0.1.0"
