"""Resampling schemes, bootstrap distributions and p-values.

Sample generators accept `size` (number of resamples, drawn in one block from
the stream) and return arrays with a leading resample axis when size is given.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .dgp import TimeSeriesPair, lag, simulate_ar1
from .empirical import EmpiricalDistribution
from .errors import DegenerateError, DomainError
from .estimators import FitResult, IvxParams, ivx_estimator, ols_fit
from .rng import as_generator
from .statistics import IVX_KINDS, RHO_KINDS, StatSpec, compute

SCHEMES = ("wild", "iid", "rbb", "sieve")
RECENTER = ("null", "estimate")
TAILS = ("right", "left", "two_sided_abs")
EXCLUDED_CAP = 0.01


@dataclass(frozen=True)
class BootstrapScheme:
    kind: str = "wild"
    recenter: str = "null"
    beta0: Optional[float] = None    # None: take the statistic's null value
    b: Optional[int] = None          # rbb block length
    mu_hat: float = 0.0              # rbb drift
    rho_tilde: Optional[float] = None  # rbb residual coefficient; None = in-sample OLS
    p: Optional[int] = None          # sieve order; None = AIC over 1..floor(n^(1/3))
    r: int = 100                     # sieve burn-in

    def __post_init__(self):
        if self.kind not in SCHEMES:
            raise DomainError(f"unknown bootstrap scheme {self.kind!r}")
        if self.recenter not in RECENTER:
            raise DomainError(f"recenter must be one of {RECENTER}")
        if self.kind == "rbb" and (self.b is None or self.b < 1):
            raise DomainError("rbb needs a positive block length b")
        if self.p is not None and self.p < 1:
            raise DomainError("sieve order must be >= 1")
        if self.r < 0:
            raise DomainError("sieve burn-in must be >= 0")


def _shape(size):
    if size is None:
        return ()
    return (size,) if isinstance(size, (int, np.integer)) else tuple(size)


def _finish_pair(fit: FitResult, u_s, v_s, beta_gen, y1):
    x_s = simulate_ar1(float(fit.rho_hat), v_s, 0.0)
    y_s = beta_gen * lag(x_s, 0.0) + u_s
    if y1 is not None:
        y_s[..., 0] = y1
    return TimeSeriesPair(y=y_s, x=x_s, x_prev0=0.0, u=u_s, v=v_s)


def wild_bootstrap_sample(fit: FitResult, stream=None, beta0=0.0, recenter="null",
                          y1=None, size=None, multipliers=None):
    """u* = e u~, v* = e v~ with one Gaussian e_t per date; x* = rho_hat x* + v*.

    Under recenter="estimate" y* uses beta_hat and the first observation is set
    to `y1` (the original Y_1) when given.
    """
    n = fit.n
    e = (as_generator(stream).standard_normal(_shape(size) + (n,))
         if multipliers is None else np.asarray(multipliers, dtype=float))
    b = float(fit.beta_hat) if recenter == "estimate" else beta0
    return _finish_pair(fit, e * fit.u_resid, e * fit.v_resid, b,
                        y1 if recenter == "estimate" else None)


def iid_residual_bootstrap_sample(fit: FitResult, stream=None, beta0=0.0, recenter="null",
                                  y1=None, size=None, indices=None):
    """Resample centered residual pairs (u~_t, v~_t) jointly with replacement."""
    n = fit.n
    idx = (as_generator(stream).integers(0, n, _shape(size) + (n,))
           if indices is None else np.asarray(indices))
    b = float(fit.beta_hat) if recenter == "estimate" else beta0
    return _finish_pair(fit, fit.u_resid[idx], fit.v_resid[idx], b,
                        y1 if recenter == "estimate" else None)


def rbb_residuals(x, rho_tilde=None):
    """Centered v_t = X_t - rho~ X_{t-1}, t = 2..n, and the rho~ used."""
    x = np.asarray(x, dtype=float)
    if rho_tilde is None:
        rho_tilde = float((x[:-1] * x[1:]).sum() / (x[:-1] * x[:-1]).sum())
    v = x[1:] - rho_tilde * x[:-1]
    return v - v.mean(), rho_tilde


def rbb_sample(x, x0=0.0, rho_tilde=None, b=1, mu_hat=0.0, stream=None, size=None,
               residuals=None, starts=None):
    """Residual-based block bootstrap pseudo-series of length l = kb + 1.

    The pseudo-series is conditional on X_1..X_n; `x0` plays no role and is
    accepted for interface symmetry. `residuals` (length n-1) replaces the
    centered residuals and `starts` (values in 1..n-b) the block starts.
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    if not 1 <= b < n:
        raise DomainError(f"block length must satisfy 1 <= b < n, got b={b}, n={n}")
    vh = rbb_residuals(x, rho_tilde)[0] if residuals is None else np.asarray(residuals, float)
    k = (n - 1) // b
    if starts is None:
        starts = as_generator(stream).integers(1, n - b + 1, _shape(size) + (k,))
    starts = np.asarray(starts)
    # X*_t for t = mb+2..mb+b+1 uses v_{i_m+s}, s = 1..b -> vh[i_m - 1 + (s-1)]
    idx = (starts[..., None] - 1 + np.arange(b)).reshape(starts.shape[:-1] + (k * b,))
    steps = mu_hat + vh[idx]
    zero = np.zeros(steps.shape[:-1] + (1,))
    return x[0] + np.concatenate([zero, np.cumsum(steps, axis=-1)], axis=-1)


# --- sieve -------------------------------------------------------------------

@dataclass
class SieveFit:
    phi: np.ndarray      # (p, d, d), eta_t = sum_j phi[j-1] eta_{t-j} + e_t
    resid: np.ndarray    # centered residuals, (n-p, d)
    p: int


def _autocov(eta, h):
    n = eta.shape[0]
    return eta[h:].T @ eta[: n - h] / n     # E[eta_{t+h} eta_t^T]


def yule_walker_var(eta, p):
    eta = np.asarray(eta, dtype=float)
    if eta.ndim == 1:
        eta = eta[:, None]
    n, d = eta.shape
    if n <= p * d + 1:
        raise DomainError(f"sieve needs n > p d + 1 (n={n}, p={p}, d={d})")
    ec = eta - eta.mean(0)
    G = [_autocov(ec, h) for h in range(p + 1)]
    R = np.empty((p * d, p * d))
    for i in range(p):
        for j in range(p):
            h = j - i
            R[i * d:(i + 1) * d, j * d:(j + 1) * d] = G[h] if h >= 0 else G[-h].T
    rhs = np.hstack(G[1:])       # [Gamma(1) ... Gamma(p)]
    try:
        A = np.linalg.solve(R.T, rhs.T).T
    except np.linalg.LinAlgError as exc:
        raise DegenerateError(f"singular Yule-Walker system: {exc}") from exc
    phi = A.reshape(d, p, d).transpose(1, 0, 2)
    sig = G[0] - sum(phi[j] @ G[j + 1].T for j in range(p))
    return phi, sig


def companion_radius(phi):
    p, d, _ = phi.shape
    C = np.zeros((p * d, p * d))
    C[:d] = np.hstack(list(phi))
    if p > 1:
        C[d:, :-d] = np.eye((p - 1) * d)
    return float(np.max(np.abs(np.linalg.eigvals(C))))


def select_sieve_order(eta, pmax=None):
    eta = np.asarray(eta, dtype=float)
    if eta.ndim == 1:
        eta = eta[:, None]
    n, d = eta.shape
    pmax = pmax or max(1, int(np.floor(n ** (1.0 / 3.0))))
    best, best_aic = 1, np.inf
    for p in range(1, pmax + 1):
        if n <= p * d + 1:
            break
        _, sig = yule_walker_var(eta, p)
        sign, logdet = np.linalg.slogdet(sig)
        aic = logdet + 2.0 * p * d * d / n if sign > 0 else np.inf
        if aic < best_aic:
            best, best_aic = p, aic
    return best


def fit_sieve(eta, p=None):
    eta = np.asarray(eta, dtype=float)
    if eta.ndim == 1:
        eta = eta[:, None]
    n, d = eta.shape
    p = select_sieve_order(eta) if p is None else int(p)
    phi, _ = yule_walker_var(eta, p)
    pred = sum(eta[p - j - 1: n - j - 1] @ phi[j].T for j in range(p))
    e = eta[p:] - pred
    return SieveFit(phi=phi, resid=e - e.mean(0), p=p)


def sieve_sample_from_fit(sf: SieveFit, n, r=100, beta0=0.0, stream=None, size=None, shocks=None):
    """eta* by the fitted VAR from zero start, burn-in r; x* = cumsum(v*), y* = beta0' x* + u*."""
    d = sf.resid.shape[1]
    shp = _shape(size)
    if shocks is None:
        idx = as_generator(stream).integers(0, sf.resid.shape[0], shp + (r + n,))
        shocks = sf.resid[idx]
    shocks = np.asarray(shocks, dtype=float)
    T = shocks.shape[-2]
    eta = np.zeros(shocks.shape[:-2] + (T, d))
    for t in range(T):
        acc = shocks[..., t, :].copy()
        for j in range(min(sf.p, t)):
            acc += eta[..., t - j - 1, :] @ sf.phi[j].T
        eta[..., t, :] = acc
    eta = eta[..., T - n:, :]
    u_s, v_s = eta[..., 0], eta[..., 1:]
    x_s = np.cumsum(v_s, axis=-2)
    y_s = x_s @ np.atleast_1d(np.asarray(beta0, dtype=float)) + u_s
    if d == 2:
        x_s = x_s[..., 0]
    return y_s, x_s


def sieve_bootstrap_sample(eta, p=None, r=100, beta0=0.0, stream=None, size=None, shocks=None):
    sf = fit_sieve(eta, p)
    n = np.asarray(eta).shape[0]
    return sieve_sample_from_fit(sf, n, r, beta0, stream, size, shocks)


def sieve_innovations(y, x, x0=0.0, beta0=0.0):
    """eta = (y - beta0 x, dx) for the cointegrating regression y_t = beta x_t + u_t."""
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    return np.column_stack([y - beta0 * x, x - lag(x, x0)])


# --- distributions and p-values ----------------------------------------------

def _fit_for(stat: StatSpec, data: TimeSeriesPair, ivx: IvxParams):
    if stat.kind in IVX_KINDS:
        return ivx_estimator(data.y, data.x, data.x_prev0, ivx)
    return ols_fit(data.y, data.x, data.x_prev0)


def _resolve_beta0(stat, scheme):
    return stat.null_beta if scheme.beta0 is None else float(scheme.beta0)


def bootstrap_statistics(data: TimeSeriesPair, stat: StatSpec, scheme: BootstrapScheme, B,
                         stream, ivx: IvxParams = IvxParams()):
    """Raw (unsorted, in resample order) bootstrap statistics; NaN marks degenerate resamples."""
    rng = as_generator(stream)
    beta0 = _resolve_beta0(stat, scheme)
    if scheme.kind in ("wild", "iid"):
        fit = _fit_for(stat, data, ivx)
        gen = wild_bootstrap_sample if scheme.kind == "wild" else iid_residual_bootstrap_sample
        bs = gen(fit, rng, beta0=beta0, recenter=scheme.recenter, y1=float(data.y[0]), size=B)
        nb = float(fit.beta_hat) if scheme.recenter == "estimate" else beta0
        sp = stat.with_nulls(null_beta=nb, null_rho=float(fit.rho_hat))
        _, s = compute(sp, bs.y, bs.x, 0.0, ivx, strict=False)
        return np.asarray(s, dtype=float)
    if scheme.kind == "rbb":
        if stat.kind not in RHO_KINDS:
            raise DomainError("the block bootstrap resamples the regressor only; use an autoregressive statistic")
        xs = rbb_sample(data.x, data.x_prev0, scheme.rho_tilde, scheme.b, scheme.mu_hat, rng, size=B)
        sp = stat.with_nulls(null_rho=1.0)
        est, s = compute(sp, None, xs[..., 1:], xs[..., 0], ivx, strict=False)
        if sp.kind == "n_ols":
            s = xs.shape[-1] * (est - 1.0)   # l (rho* - 1)
        return np.asarray(s, dtype=float)
    # sieve: FM-OLS t-statistic of the cointegrating slope
    if stat.kind != "fm_t":
        raise DomainError("the sieve scheme is paired with the fm_t statistic")
    eta = sieve_innovations(data.y, data.x, data.x_prev0, beta0)
    sf = fit_sieve(eta, scheme.p)
    ys, xs = sieve_sample_from_fit(sf, data.n, scheme.r, beta0, rng, size=B)
    _, s = compute(stat.with_nulls(null_beta=beta0), ys, xs, 0.0, ivx, strict=False)
    return np.asarray(s, dtype=float)


def bootstrap_distribution(data: TimeSeriesPair, stat: StatSpec, scheme: BootstrapScheme, B,
                           stream, ivx: IvxParams = IvxParams()):
    if B < 1:
        raise DomainError("B must be >= 1")
    s = bootstrap_statistics(data, stat, scheme, B, stream, ivx)
    ok = np.isfinite(s)
    excluded = int(B - ok.sum())
    if excluded > EXCLUDED_CAP * B or excluded == B:
        raise DegenerateError(f"{excluded} of {B} bootstrap resamples were degenerate")
    return EmpiricalDistribution(s[ok], meta={"scheme": scheme.kind, "stat": stat.kind, "B": B},
                                 excluded=excluded)


def bootstrap_pvalue(dist, observed, tail="right"):
    d = dist.draws if isinstance(dist, EmpiricalDistribution) else np.sort(np.asarray(dist, float))
    B = d.size
    if tail == "right":
        return float(B - np.searchsorted(d, observed, side="left")) / B
    if tail == "left":
        return float(np.searchsorted(d, observed, side="right")) / B
    if tail == "two_sided_abs":
        return float(np.mean(np.abs(d) >= abs(observed)))
    raise DomainError(f"tail must be one of {TAILS}")


def default_tail(kind):
    if kind == "wald_ivx":
        return "right"
    if kind in RHO_KINDS:
        return "left"
    return "two_sided_abs"


def bootstrap_test(data: TimeSeriesPair, stat: StatSpec, scheme: BootstrapScheme, B, stream,
                   ivx: IvxParams = IvxParams(), tail=None):
    """Observed statistic, its bootstrap p-value and the bootstrap distribution."""
    est, obs = compute(stat, data.y, data.x, data.x_prev0, ivx, strict=True)
    dist = bootstrap_distribution(data, stat, scheme, B, stream, ivx)
    p = bootstrap_pvalue(dist, float(obs), tail or default_tail(stat.kind))
    return float(est), float(obs), p, dist
