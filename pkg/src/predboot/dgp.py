"""Data-generating processes: innovations, AR(1) regressors, predictive system.

All simulators accept arrays with arbitrary leading (batch) dimensions; time
is always the last axis.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
from scipy.signal import lfilter

from .errors import DomainError
from .rng import as_generator


@dataclass(frozen=True)
class LocalToUnity:
    c: float
    gamma: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.gamma <= 1.0:
            raise DomainError(f"gamma must lie in (0, 1], got {self.gamma}")

    def rho(self, n):
        return lur_coefficient(self.c, self.gamma, n)


@dataclass(frozen=True)
class Fixed:
    rho_value: float

    def rho(self, n):
        return float(self.rho_value)


@dataclass(frozen=True)
class BlockModerate:
    c: float
    m: int
    K: int

    def __post_init__(self):
        if self.c >= 0:
            raise DomainError("block-moderate persistence requires c < 0")
        if self.m < 1 or self.K < 1:
            raise DomainError("m and K must be positive")

    def rho(self, n):
        if n != self.m * self.K:
            raise DomainError(f"sample size {n} != m*K = {self.m * self.K}")
        return 1.0 + self.c * self.m / n


PersistenceSpec = Union[LocalToUnity, Fixed, BlockModerate]


@dataclass(frozen=True)
class InnovationSpec:
    sigma: tuple = ((1.0, 0.0), (0.0, 1.0))
    ma_weights: tuple = (1.0,)
    error_ar: float = 0.0

    def __post_init__(self):
        s = np.asarray(self.sigma, dtype=float)
        if s.shape != (2, 2) or not np.allclose(s, s.T):
            raise DomainError("sigma must be a symmetric 2x2 matrix")
        if s[0, 0] <= 0 or s[1, 1] <= 0:
            raise DomainError("variances of u and v must be positive")
        if s[0, 1] ** 2 > s[0, 0] * s[1, 1] * (1 + 1e-12):
            raise DomainError("sigma is not positive semi-definite")
        w = np.asarray(self.ma_weights, dtype=float)
        if w.ndim != 1 or w.size == 0:
            raise DomainError("ma_weights must be a non-empty sequence")
        if w.size > 1 and w.sum() == 0:
            raise DomainError("MA weights must not sum to zero")
        if not -1.0 < self.error_ar < 1.0:
            raise DomainError("error_ar must lie in (-1, 1)")

    @classmethod
    def from_moments(cls, sigma_u=1.0, sigma_v=1.0, sigma_uv=0.0, **kw):
        """sigma_uv is the correlation when both scales are one; in general a covariance."""
        s = ((sigma_u ** 2, sigma_uv), (sigma_uv, sigma_v ** 2))
        return cls(sigma=s, **kw)

    @property
    def burn_in(self):
        return len(self.ma_weights) - 1

    def cholesky(self):
        s = np.asarray(self.sigma, dtype=float)
        su = np.sqrt(s[0, 0])
        l21 = s[0, 1] / su
        l22 = np.sqrt(max(s[1, 1] - l21 ** 2, 0.0))
        return su, l21, l22


@dataclass(frozen=True)
class DgpSpec:
    beta: float
    persistence: PersistenceSpec
    innovations: InnovationSpec = field(default_factory=InnovationSpec)
    n: int = 100
    x0: float = 0.0

    def __post_init__(self):
        if self.n < 4:
            raise DomainError("n must be at least 4")

    @property
    def rho(self):
        return self.persistence.rho(self.n)


@dataclass
class TimeSeriesPair:
    y: np.ndarray
    x: np.ndarray
    x_prev0: float = 0.0
    u: Optional[np.ndarray] = None
    v: Optional[np.ndarray] = None

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float)
        self.x = np.asarray(self.x, dtype=float)
        if self.y.shape != self.x.shape or self.y.shape[-1] < 1:
            raise DomainError("y and x must have the same non-zero length")

    @property
    def n(self):
        return self.x.shape[-1]


def lur_coefficient(c, gamma, n):
    if not 0.0 < gamma <= 1.0:
        raise DomainError(f"gamma must lie in (0, 1], got {gamma}")
    if n < 1:
        raise DomainError("n must be positive")
    return 1.0 + c / float(n) ** gamma


def innovations_from_base(spec: InnovationSpec, base):
    """Map standard-normal base draws of shape (..., n+L, 2) to (u, v) of length n.

    Column 0 drives u, column 1 the part of v orthogonal to u. The first L
    rows are the MA pre-sample.
    """
    base = np.asarray(base, dtype=float)
    L = spec.burn_in
    su, l21, l22 = spec.cholesky()
    e_u = su * base[..., 0]
    e_v = l21 * base[..., 0] + l22 * base[..., 1]
    w = np.asarray(spec.ma_weights, dtype=float)
    v = lfilter(w, [1.0], e_v, axis=-1)[..., L:] if L else e_v
    u = e_u[..., L:]
    r = spec.error_ar
    if r != 0.0:
        # stationary start: u_1 carries the unconditional variance
        u = u.copy()
        u[..., 0] = u[..., 0] / np.sqrt(1.0 - r * r)
        u = lfilter([1.0], [1.0, -r], u, axis=-1)
    return u, v


def simulate_innovation_pair(spec: InnovationSpec, n, stream, base=None):
    if base is None:
        base = as_generator(stream).standard_normal((n + spec.burn_in, 2))
    return innovations_from_base(spec, base)


def simulate_ar1(rho, v, x0=0.0):
    """X_t = rho X_{t-1} + v_t with X_0 = x0, along the last axis."""
    v = np.asarray(v, dtype=float)
    if v.shape[-1] == 0:
        return v.copy()
    zi = (rho * np.asarray(x0, dtype=float)) * np.ones(v.shape[:-1] + (1,))
    x, _ = lfilter([1.0], [1.0, -rho], v, axis=-1, zi=zi)
    return x


def lag(x, x0=0.0):
    """(X_0, X_1, ..., X_{n-1}) from (X_1, ..., X_n)."""
    x = np.asarray(x, dtype=float)
    head = np.broadcast_to(np.asarray(x0, dtype=float), x.shape[:-1])[..., None]
    return np.concatenate([head, x[..., :-1]], axis=-1)


def predictive_from_innovations(beta, rho, u, v, x0=0.0):
    x = simulate_ar1(rho, v, x0)
    y = beta * lag(x, x0) + u
    return y, x


def simulate_predictive_system(spec: DgpSpec, stream=None, innovations=None, base=None):
    """Simulate (Y, X). `innovations=(u, v)` bypasses the random source."""
    if innovations is None:
        u, v = simulate_innovation_pair(spec.innovations, spec.n, stream, base=base)
    else:
        u, v = (np.asarray(a, dtype=float) for a in innovations)
    y, x = predictive_from_innovations(spec.beta, spec.rho, u, v, spec.x0)
    return TimeSeriesPair(y=y, x=x, x_prev0=spec.x0, u=u, v=v)


def simulate_block_moderate(c, m, K, innov: InnovationSpec, stream=None, base=None):
    """AR(1) with rho = 1 + c m / n, n = m K, X_0 = 0."""
    p = BlockModerate(c, m, K)
    n = m * K
    _, v = simulate_innovation_pair(innov, n, stream, base=base)
    return simulate_ar1(p.rho(n), v, 0.0)
