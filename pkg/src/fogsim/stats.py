from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional


@dataclass(frozen=True)
class LatencyStats:
    count: int
    lost: int = 0
    min_ms: Optional[float] = None
    mean_ms: Optional[float] = None
    median_ms: Optional[float] = None
    p95_ms: Optional[float] = None
    max_ms: Optional[float] = None

    @property
    def empty(self):
        return self.count == 0


def percentile(sorted_values, q):
    """Linear-interpolation percentile over an already sorted sequence (0 <= q <= 100)."""
    n = len(sorted_values)
    if n == 0:
        raise ValueError("percentile of empty sequence")
    pos = (n - 1) * q / 100.0
    lo = math.floor(pos)
    hi = min(lo + 1, n - 1)
    frac = pos - lo
    if frac == 0.0:
        return float(sorted_values[lo])
    return sorted_values[lo] + (sorted_values[hi] - sorted_values[lo]) * frac


def summarize(samples: Iterable[float], lost: int = 0) -> LatencyStats:
    values = sorted(float(v) for v in samples)
    if not values:
        return LatencyStats(count=0, lost=lost)
    # fsum over the sorted list keeps the mean independent of input order
    mean = math.fsum(values) / len(values)
    # clamp guards the last-ulp case where rounding pushes the mean past an extreme
    mean = min(max(mean, values[0]), values[-1])
    return LatencyStats(
        count=len(values),
        lost=lost,
        min_ms=values[0],
        mean_ms=mean,
        median_ms=percentile(values, 50),
        p95_ms=percentile(values, 95),
        max_ms=values[-1],
    )
