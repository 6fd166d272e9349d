"""Empirical distributions of scalar statistics and the Kolmogorov-Smirnov distance."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class EmpiricalDistribution:
    draws: np.ndarray
    meta: dict = field(default_factory=dict)
    excluded: int = 0

    def __post_init__(self):
        d = np.sort(np.asarray(self.draws, dtype=float).ravel())
        if d.size == 0:
            raise ValueError("empirical distribution needs at least one draw")
        self.draws = d

    @property
    def size(self):
        return self.draws.size

    def cdf(self, t):
        """Right-continuous step CDF: fraction of draws <= t."""
        return np.searchsorted(self.draws, t, side="right") / self.size

    def quantile(self, q):
        """Smallest draw x with cdf(x) >= q; quantile(0) is the minimum."""
        q = np.asarray(q, dtype=float)
        k = np.ceil(q * self.size).astype(int) - 1
        return self.draws[np.clip(k, 0, self.size - 1)]

    def mean(self):
        return float(self.draws.mean())

    def var(self):
        return float(self.draws.var(ddof=1)) if self.size > 1 else 0.0


def _sorted(a):
    if isinstance(a, EmpiricalDistribution):
        return a.draws
    return np.sort(np.asarray(a, dtype=float).ravel())


def ks_distance(a, b):
    """sup |F_a - F_b| where b is a sample, an EmpiricalDistribution, or a CDF callable."""
    xa = _sorted(a)
    na = xa.size
    if callable(b) and not isinstance(b, EmpiricalDistribution):
        F = np.asarray(b(xa), dtype=float)
        i = np.arange(1, na + 1)
        return float(max(np.max(i / na - F), np.max(F - (i - 1) / na)))
    xb = _sorted(b)
    pooled = np.concatenate([xa, xb])
    fa = np.searchsorted(xa, pooled, side="right") / na
    fb = np.searchsorted(xb, pooled, side="right") / xb.size
    return float(np.max(np.abs(fa - fb)))
