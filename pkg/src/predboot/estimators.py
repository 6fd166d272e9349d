"""Point estimators: OLS (rho and beta), IVX, long-run covariance, FM-OLS.

The OLS/IVX functions accept arrays of shape (..., n). With strict=True a
zero denominator anywhere raises DegenerateError; with strict=False the
affected entries come back as NaN so batch callers can count and drop them.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.signal import lfilter

from .dgp import lag
from .errors import DegenerateError, DomainError


@dataclass(frozen=True)
class IvxParams:
    c_z: float = -1.0
    gamma_z: float = 0.95

    def __post_init__(self):
        if not self.c_z < 0:
            raise DomainError(f"c_z must be negative, got {self.c_z}")
        if not 0.0 < self.gamma_z < 1.0:
            raise DomainError(f"gamma_z must lie in (0, 1), got {self.gamma_z}")

    def rho_z(self, n):
        r = 1.0 + self.c_z / float(n) ** self.gamma_z
        if not 0.0 < r < 1.0:
            raise DomainError(f"rho_z = {r} outside (0, 1) at n = {n}")
        return r


@dataclass
class FitResult:
    beta_hat: np.ndarray
    rho_hat: np.ndarray
    u_resid: np.ndarray          # centered predictive residuals
    v_resid: np.ndarray          # centered autoregression residuals
    method: str                  # "OLS" or "IVX"
    ivx: Optional[IvxParams] = None
    z: Optional[np.ndarray] = None
    x0: float = 0.0
    szx: Optional[np.ndarray] = None   # sum Z_{t-1} X_{t-1}
    szz: Optional[np.ndarray] = None   # sum Z_{t-1}^2
    sxx: Optional[np.ndarray] = None   # sum X_{t-1}^2

    @property
    def n(self):
        return self.u_resid.shape[-1]


def _ratio(num, den, strict, what):
    den = np.asarray(den, dtype=float)
    bad = den == 0
    if np.any(bad):
        if strict:
            raise DegenerateError(f"zero {what}")
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(bad, np.nan, num / np.where(bad, 1.0, den))
        return out[()] if out.ndim == 0 else out
    return num / den


def _dot(a, b):
    # plain elementwise reduction, no BLAS: bitwise stable across threads
    return (a * b).sum(axis=-1)


def center(a):
    a = np.asarray(a, dtype=float)
    return a - a.mean(axis=-1, keepdims=True)


def ols_ar1(x, x0=0.0, strict=True):
    x = np.asarray(x, dtype=float)
    xl = lag(x, x0)
    return _ratio(_dot(xl, x), _dot(xl, xl), strict, "sum of squared lagged regressor")


def ols_beta(y, x, x0=0.0, strict=True):
    xl = lag(x, x0)
    return _ratio(_dot(xl, np.asarray(y, dtype=float)), _dot(xl, xl), strict,
                  "sum of squared lagged regressor")


def ivx_instrument(x, x0=0.0, params: IvxParams = IvxParams(), rho_z=None):
    """Z_t = rho_z Z_{t-1} + dX_t with Z_0 = 0. `rho_z` overrides params (test hook)."""
    x = np.asarray(x, dtype=float)
    if rho_z is None:
        rho_z = params.rho_z(x.shape[-1])
    dx = x - lag(x, x0)
    return lfilter([1.0], [1.0, -rho_z], dx, axis=-1)


def ols_fit(y, x, x0=0.0, strict=True):
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    xl = lag(x, x0)
    sxx = _dot(xl, xl)
    b = _ratio(_dot(xl, y), sxx, strict, "sum of squared lagged regressor")
    r = _ratio(_dot(xl, x), sxx, strict, "sum of squared lagged regressor")
    b_ = np.asarray(b)[..., None]
    r_ = np.asarray(r)[..., None]
    return FitResult(beta_hat=b, rho_hat=r, u_resid=center(y - b_ * xl),
                     v_resid=center(x - r_ * xl), method="OLS", x0=x0, sxx=sxx)


def ivx_estimator(y, x, x0=0.0, params: IvxParams = IvxParams(), strict=True, rho_z=None):
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    xl = lag(x, x0)
    z = ivx_instrument(x, x0, params, rho_z=rho_z)
    zl = lag(z, 0.0)
    szx = _dot(zl, xl)
    b = _ratio(_dot(zl, y), szx, strict, "instrument cross-moment")
    sxx = _dot(xl, xl)
    r = _ratio(_dot(xl, x), sxx, strict, "sum of squared lagged regressor")
    b_ = np.asarray(b)[..., None]
    r_ = np.asarray(r)[..., None]
    return FitResult(beta_hat=b, rho_hat=r, u_resid=center(y - b_ * xl),
                     v_resid=center(x - r_ * xl), method="IVX", ivx=params, z=z,
                     x0=x0, szx=szx, szz=_dot(zl, zl), sxx=sxx)


# --- long-run covariance and FM-OLS -------------------------------------------

def parzen_weight(x):
    a = np.abs(np.asarray(x, dtype=float))
    return np.where(a <= 0.5, 1.0 - 6.0 * a ** 2 + 6.0 * a ** 3,
                    np.where(a <= 1.0, 2.0 * (1.0 - a) ** 3, 0.0))


def auto_bandwidth(n):
    return max(1, int(np.floor(4.0 * (n / 100.0) ** (2.0 / 9.0))))


@dataclass
class LongRunCov:
    omega: np.ndarray
    lam: np.ndarray
    sigma: np.ndarray
    delta: np.ndarray
    bandwidth: int


def longrun_covariance(eta, bandwidth="auto"):
    """Parzen-window estimate with Gamma_j = n^-1 sum_t eta_t eta_{t+j}^T."""
    eta = np.asarray(eta, dtype=float)
    if eta.ndim == 1:
        eta = eta[:, None]
    n = eta.shape[0]
    M = auto_bandwidth(n) if bandwidth == "auto" else int(bandwidth)
    if M < 0 or M >= n:
        raise DomainError(f"bandwidth must satisfy 0 <= M < n, got M={M}, n={n}")
    sigma = eta.T @ eta / n
    lam = np.zeros_like(sigma)
    for j in range(1, M + 1):
        w = float(parzen_weight(j / M))
        if w == 0.0:
            continue
        lam += w * (eta[:-j].T @ eta[j:]) / n
    delta = lam + sigma
    omega = lam.T + delta
    return LongRunCov(omega=omega, lam=lam, sigma=sigma, delta=delta, bandwidth=M)


def _as_matrix(X):
    X = np.asarray(X, dtype=float)
    return X[:, None] if X.ndim == 1 else X


def fm_ols(y, X, lrcov: LongRunCov, x0=None, zero_corrections=False):
    """Fully modified OLS of y_t on x_t (no intercept).

    `lrcov` must be the long-run covariance of eta = (u, dx) with u in the
    first coordinate. Returns (beta_tilde, V_tilde).
    """
    y = np.asarray(y, dtype=float)
    X = _as_matrix(X)
    n, d = X.shape
    x0 = np.zeros(d) if x0 is None else np.atleast_1d(np.asarray(x0, dtype=float))
    dX = np.diff(np.vstack([x0[None, :], X]), axis=0)
    om, de = lrcov.omega, lrcov.delta
    w11, w21, O22 = om[0, 0], om[1:, 0], om[1:, 1:]
    try:
        a = np.linalg.solve(O22, w21)      # Omega_22^{-1} omega_21
        sxx_inv = np.linalg.inv(X.T @ X)
    except np.linalg.LinAlgError as exc:
        raise DegenerateError(f"singular matrix in FM-OLS: {exc}") from exc
    if zero_corrections:
        y_t = y
        dtil = np.zeros(d)
    else:
        y_t = y - dX @ a
        # one-sided covariance of (dx leading u), minus the part explained through dx
        dtil = de[1:, 0] - de[1:, 1:] @ a
    beta = sxx_inv @ (X.T @ y_t - n * dtil)
    w112 = w11 - w21 @ a
    return beta, w112 * sxx_inv


def fm_ols_fit(y, X, x0=None, bandwidth="auto", beta_u=None):
    """First-stage OLS residuals -> long-run covariance -> FM-OLS.

    `beta_u` fixes the slope used for the first-stage residuals (null-restricted
    residuals); default is unrestricted OLS.
    """
    y = np.asarray(y, dtype=float)
    X = _as_matrix(X)
    n, d = X.shape
    x0v = np.zeros(d) if x0 is None else np.atleast_1d(np.asarray(x0, dtype=float))
    if beta_u is None:
        try:
            beta_u = np.linalg.solve(X.T @ X, X.T @ y)
        except np.linalg.LinAlgError as exc:
            raise DegenerateError(f"singular regressor moment matrix: {exc}") from exc
    u = y - X @ np.atleast_1d(beta_u)
    dX = np.diff(np.vstack([x0v[None, :], X]), axis=0)
    lr = longrun_covariance(np.column_stack([u, dX]), bandwidth)
    beta, V = fm_ols(y, X, lr, x0=x0v)
    return beta, V, lr
