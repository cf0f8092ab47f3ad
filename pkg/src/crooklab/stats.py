"""Rate estimates with Wilson score intervals and simple mean intervals."""

from __future__ import annotations

import math
from dataclasses import dataclass

Z95 = 1.959963984540054


def wilson(successes: int, trials: int, z: float = Z95) -> tuple[float, float]:
    if trials == 0:
        return 0.0, 1.0
    p = successes / trials
    z2 = z * z
    denom = 1 + z2 / trials
    centre = (p + z2 / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z2 / (4 * trials * trials)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


@dataclass(frozen=True)
class RateEstimate:
    """A binomial frequency; exact counts are kept so reductions stay exact."""

    successes: int
    trials: int

    @property
    def estimate(self) -> float:
        return self.successes / self.trials if self.trials else 0.0

    @property
    def ci(self) -> tuple[float, float]:
        return wilson(self.successes, self.trials)

    @property
    def ci_low(self) -> float:
        return self.ci[0]

    @property
    def ci_high(self) -> float:
        return self.ci[1]

    @property
    def ci_width(self) -> float:
        lo, hi = self.ci
        return hi - lo

    def contains(self, value: float) -> bool:
        lo, hi = self.ci
        return lo <= value <= hi

    def as_dict(self) -> dict:
        lo, hi = self.ci
        return {"successes": self.successes, "trials": self.trials,
                "estimate": self.estimate, "ci_low": lo, "ci_high": hi}


@dataclass(frozen=True)
class MeanEstimate:
    mean: float
    ci_low: float
    ci_high: float
    samples: int


def mean_ci(values, z: float = Z95, lo: float = 0.0, hi: float = 1.0) -> MeanEstimate:
    """Normal-approximation interval for the mean of bounded samples."""
    vals = list(values)
    n = len(vals)
    if n == 0:
        return MeanEstimate(0.0, lo, hi, 0)
    m = math.fsum(vals) / n
    if n == 1:
        return MeanEstimate(m, lo, hi, 1)
    var = math.fsum((v - m) ** 2 for v in vals) / (n - 1)
    half = z * math.sqrt(var / n)
    return MeanEstimate(m, max(lo, m - half), min(hi, m + half), n)
