"""Brownian / Ornstein-Uhlenbeck path simulation and limit functionals.

Conventions: stochastic integrals are left-point (Ito) sums, time integrals
are left Riemann sums on the same grid.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import stats
from scipy.signal import lfilter

from .empirical import EmpiricalDistribution
from .errors import DomainError
from .rng import as_generator

KINDS = ("dfxi", "dfratio", "ouratio", "psigamma", "mixed_ivx", "explosive_cauchy", "v_over_u")


@dataclass
class PathGrid:
    N: int
    w: np.ndarray    # levels on {0, 1/N, ..., 1}, shape (..., N+1)
    dw: np.ndarray   # increments, shape (..., N)

    @property
    def dt(self):
        return 1.0 / self.N

    @property
    def t(self):
        return np.arange(self.N + 1) / self.N


def _levels(a, incr):
    """L_0 = 0, L_{i+1} = a L_i + incr_i."""
    body = lfilter([1.0], [1.0, -a], incr, axis=-1)
    zero = np.zeros(incr.shape[:-1] + (1,))
    return np.concatenate([zero, body], axis=-1)


def simulate_brownian(N, stream=None, increments=None, size=()):
    if N < 1:
        raise DomainError("N must be positive")
    if increments is None:
        size = (size,) if isinstance(size, (int, np.integer)) else tuple(size)
        dw = as_generator(stream).standard_normal(size + (N,)) * np.sqrt(1.0 / N)
    else:
        dw = np.asarray(increments, dtype=float)
        if dw.shape[-1] != N:
            raise DomainError("increments do not match the grid")
    return PathGrid(N=N, w=_levels(1.0, dw), dw=dw)


def ou_step_variance(c, dt):
    """Var of the exact one-step OU shock, (e^{2c dt} - 1) / (2c), continuous at c = 0."""
    x = c * dt
    if abs(x) < 1e-8:
        return dt * (1.0 + x + 2.0 * x * x / 3.0)
    return np.expm1(2.0 * x) / (2.0 * c)


def simulate_ou(c, path: PathGrid):
    """J_c on the grid, driven by the path's own increments (J_0 = W when c = 0)."""
    dt = path.dt
    scale = np.sqrt(ou_step_variance(c, dt) / dt)
    return _levels(np.exp(c * dt), scale * path.dw)


def ito_left_sum(path: PathGrid, integrand):
    f = np.asarray(integrand, dtype=float)
    if f.shape[-1] == path.N + 1:
        f = f[..., :-1]
    elif f.shape[-1] != path.N:
        raise DomainError("integrand is not on the path grid")
    return (f * path.dw).sum(-1)


def time_integral(path: PathGrid, f):
    f = np.asarray(f, dtype=float)
    if f.shape[-1] == path.N + 1:
        f = f[..., :-1]
    elif f.shape[-1] != path.N:
        raise DomainError("integrand is not on the path grid")
    return f.sum(-1) * path.dt


@dataclass(frozen=True)
class ReferenceSpec:
    kind: str = "dfratio"
    N: int = 2000
    M: int = 20000
    c: float = 0.0                # OU mean reversion (ouratio, mixed_ivx)
    gamma: float = float("inf")   # psigamma parameter; inf is the 1/(1-t) limit
    c_z: float = -1.0
    omega_xx: float = 1.0         # long-run variance of the regressor innovation
    sigma_u: float = 1.0
    studentized: bool = True

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown reference kind {self.kind!r}")
        if self.M < 1 or self.N < 16:
            raise DomainError("reference needs M >= 1 and N >= 16")
        if self.kind == "mixed_ivx" and not self.c_z < 0:
            raise DomainError("c_z must be negative")

    @property
    def analytic_cdf(self):
        if self.kind in ("explosive_cauchy", "v_over_u"):
            return stats.cauchy.cdf
        if self.kind == "mixed_ivx" and self.studentized:
            return stats.norm.cdf
        return None


def _psi_weights(gamma, N):
    t = np.arange(N) / N
    if np.isinf(gamma):
        g = 1.0 / (1.0 - t)
        g[-1] = 0.0   # drop the final cell, where 1/(1-t) blows up in the limit
        return g
    return 1.0 / (1.0 - t + t * np.exp(-2.0 * gamma))


def functional_draws(spec: ReferenceSpec, stream, size):
    rng = as_generator(stream)
    k = spec.kind
    if k == "explosive_cauchy":
        return np.tan(np.pi * (rng.random(size) - 0.5))
    if k == "v_over_u":
        z = rng.standard_normal((size, 2))
        return z[:, 0] / z[:, 1]
    if k == "mixed_ivx" and spec.studentized:
        return rng.standard_normal(size)
    p = simulate_brownian(spec.N, rng, size=size)
    w = p.w
    if k == "dfxi":
        return ito_left_sum(p, w) / np.sqrt(time_integral(p, w * w))
    if k == "dfratio":
        return ito_left_sum(p, w) / time_integral(p, w * w)
    if k == "ouratio":
        J = simulate_ou(spec.c, p)
        return ito_left_sum(p, J) / time_integral(p, J * J)
    if k == "psigamma":
        g = _psi_weights(spec.gamma, spec.N)
        wl = w[..., :-1]
        num = (g * wl * p.dw).sum(-1)
        den = np.sqrt((g * g * wl * wl).sum(-1) * p.dt)
        return num / den
    # unstudentized IVX limit: sigma_u sqrt(V) xi / ((-1/c_z)(int J dJ + omega^2))
    om2 = spec.omega_xx
    J = np.sqrt(om2) * simulate_ou(spec.c, p)
    jdj = (J[..., :-1] * np.diff(J, axis=-1)).sum(-1)
    v_tilde = -om2 / (2.0 * spec.c_z)
    xi = rng.standard_normal(size)
    return spec.sigma_u * np.sqrt(v_tilde) * xi / ((-1.0 / spec.c_z) * (jdj + om2))


def functional_draw(spec: ReferenceSpec, stream):
    return float(functional_draws(spec, stream, 1)[0])


def reference_distribution(spec: ReferenceSpec, stream, chunk=1000):
    """M draws of the functional, generated chunk by chunk from one stream."""
    rng = as_generator(stream)
    out = []
    left = spec.M
    while left > 0:
        m = min(chunk, left)
        out.append(functional_draws(spec, rng, m))
        left -= m
    return EmpiricalDistribution(np.concatenate(out), meta={"reference": spec.kind, "N": spec.N})
