"""Monte Carlo summaries and the two-sample Kolmogorov-Smirnov test.

Sums go through :func:`math.fsum`, which is correctly rounded, so every
aggregate here is bit-identical under any permutation of its inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special


@dataclass(frozen=True)
class MomentEstimate:
    """A Monte Carlo value with its standard error.

    ``exact`` marks values known in closed form (stderr is then 0).
    """

    value: float
    stderr: float = 0.0
    samples: int = 0
    exact: bool = False

    def __post_init__(self):
        if self.stderr < 0:
            raise ValueError("stderr must be nonnegative")
        if self.exact and self.stderr != 0:
            raise ValueError("an exact estimate carries no standard error")

    @classmethod
    def exact_value(cls, value: float) -> "MomentEstimate":
        return cls(float(value), 0.0, 0, True)

    @classmethod
    def from_samples(cls, x) -> "MomentEstimate":
        x = np.asarray(x, dtype=float).ravel()
        n = x.size
        if n == 0:
            raise ValueError("no samples")
        mean = math.fsum(x) / n
        if n == 1:
            return cls(mean, 0.0, 1)
        var = math.fsum((x - mean) ** 2) / (n - 1)
        return cls(mean, math.sqrt(var / n), n)

    @property
    def variance(self) -> float:
        """Sample variance of the underlying draws."""
        return self.stderr**2 * self.samples

    def scaled(self, factor: float) -> "MomentEstimate":
        return MomentEstimate(self.value * factor, self.stderr * abs(factor), self.samples, self.exact)

    def to_dict(self) -> dict:
        return {"value": self.value, "stderr": self.stderr, "samples": self.samples, "exact": self.exact}


def pool(estimates) -> MomentEstimate:
    """Count-weighted merge of independent estimates of the same mean.

    Reconstructs the pooled sample variance from each part's count, mean and
    variance; the result does not depend on the order of ``estimates``.
    """
    parts = [e for e in estimates if e.samples > 0]
    if not parts:
        raise ValueError("nothing to pool")
    n = sum(e.samples for e in parts)
    mean = math.fsum(e.samples * e.value for e in parts) / n
    if n == 1:
        return MomentEstimate(mean, 0.0, 1)
    ss = math.fsum(
        [(e.samples - 1) * e.variance for e in parts]
        + [e.samples * (e.value - mean) ** 2 for e in parts]
    )
    return MomentEstimate(mean, math.sqrt(ss / (n - 1) / n), n)


def z_score(a: MomentEstimate, b: MomentEstimate) -> float:
    """(a - b) / combined stderr; +-inf when both are exact but differ."""
    se = math.hypot(a.stderr, b.stderr)
    diff = a.value - b.value
    if se == 0:
        return 0.0 if diff == 0 else math.copysign(math.inf, diff)
    return diff / se


@dataclass(frozen=True)
class KsResult:
    statistic: float
    pvalue: float
    n1: int
    n2: int


def ecdf(sample, points) -> np.ndarray:
    """Right-continuous empirical CDF: fraction of ``sample`` <= each point."""
    s = np.sort(np.asarray(sample, dtype=float))
    return np.searchsorted(s, np.asarray(points, dtype=float), side="right") / s.size


def ks_two_sample(x, y) -> KsResult:
    """Two-sample KS statistic with the asymptotic Kolmogorov p-value.

    Both CDFs are evaluated at every pooled observation with the
    ``<=`` convention, so ties are handled exactly.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size == 0 or y.size == 0:
        raise ValueError("KS test needs two nonempty samples")
    pts = np.union1d(x, y)
    d = float(np.max(np.abs(ecdf(x, pts) - ecdf(y, pts))))
    en = math.sqrt(x.size * y.size / (x.size + y.size))
    p = float(special.kolmogorov(en * d)) if d > 0 else 1.0
    return KsResult(d, min(max(p, 0.0), 1.0), x.size, y.size)
