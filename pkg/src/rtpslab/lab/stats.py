"""RTT statistics: mean/min/max, nearest-rank percentiles, fixed-width histogram."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from ..errors import EmptySampleSet

PERCENTILES = {"p50": Fraction(50), "p99": Fraction(99), "p999": Fraction("99.9")}


@dataclass(frozen=True)
class LatencyStats:
    count: int
    mean: float
    min: int
    max: int
    p50: int
    p99: int
    p999: int
    stddev: float
    bucket_ns: int = 100
    histogram: dict[int, int] = field(default_factory=dict)

    @property
    def isochronous(self) -> bool:
        return self.min == self.max == self.mean


def nearest_rank(sorted_samples: Sequence[int], percentile: Fraction | int | str) -> int:
    """Smallest sample with at least ``percentile`` % of the set at or below it."""
    n = len(sorted_samples)
    if n == 0:
        raise EmptySampleSet("no samples")
    p = Fraction(percentile)
    rank = math.ceil(p * n / 100)
    return int(sorted_samples[min(max(rank, 1), n) - 1])


def compute_stats(samples: Sequence[int], bucket_ns: int = 100) -> LatencyStats:
    """Summarize integer-nanosecond RTT samples."""
    if bucket_ns <= 0:
        raise ValueError(f"bucket width must be positive, got {bucket_ns}")
    arr = np.asarray(getattr(samples, "samples", samples), dtype=np.int64)
    n = int(arr.size)
    if n == 0:
        raise EmptySampleSet("cannot compute statistics of an empty sample set")
    ordered = np.sort(arr)
    # int64 sum is exact for any realistic RTT set; int / int is correctly rounded
    mean = int(ordered.sum()) / n
    starts, counts = np.unique(ordered // bucket_ns * bucket_ns, return_counts=True)
    pct = {name: nearest_rank(ordered, p) for name, p in PERCENTILES.items()}
    return LatencyStats(
        count=n,
        mean=mean,
        min=int(ordered[0]),
        max=int(ordered[-1]),
        stddev=float(ordered.std(dtype=np.float64)),
        bucket_ns=bucket_ns,
        histogram={int(s): int(c) for s, c in zip(starts, counts)},
        **pct,
    )
