"""Test statistics built on estimator output."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .dgp import lag
from .errors import DegenerateError, DomainError
from .estimators import FitResult, IvxParams, _ratio, fm_ols_fit, ivx_estimator, ols_ar1

STAT_KINDS = (
    "selfnorm_ols",   # (sum X_{t-1}^2)^a (rho_hat - rho0) [/ s_n]
    "tn_unit_root",   # studentized a=1/2 version at rho0 = 1
    "n_ols",          # n (rho_hat - rho0)
    "sqrt_n_ols",     # sqrt(n) (rho_hat - rho0)
    "explosive_ols",  # (r^2 - 1)^-1 |r|^n (rho_hat - rho0), r = rho_hat or rho0
    "psi_ivx",
    "jn_ivx",
    "wald_ivx",
    "t_ivx",          # signed root of wald_ivx
    "fm_t",           # FM-OLS t-ratio (cointegrating regression)
)
IVX_KINDS = ("psi_ivx", "jn_ivx", "wald_ivx", "t_ivx")
RHO_KINDS = ("selfnorm_ols", "tn_unit_root", "n_ols", "sqrt_n_ols", "explosive_ols")
POWERS = (0.5, 1.0, 2.0)


@dataclass(frozen=True)
class StatSpec:
    kind: str = "wald_ivx"
    power: float = 1.0
    studentize: bool = False
    null_beta: float = 0.0
    null_rho: float = 1.0
    norm_at_estimate: bool = True   # explosive_ols only

    def __post_init__(self):
        if self.kind not in STAT_KINDS:
            raise DomainError(f"unknown statistic kind {self.kind!r}")
        if float(self.power) not in POWERS:
            raise DomainError(f"power must be one of {POWERS}, got {self.power}")

    def with_nulls(self, null_beta=None, null_rho=None):
        kw = {}
        if null_beta is not None:
            kw["null_beta"] = float(null_beta)
        if null_rho is not None:
            kw["null_rho"] = float(null_rho)
        return replace(self, **kw)


def selfnorm_ols_stat(x, x0=0.0, rho0=1.0, power=0.5, studentize=False, scale=None, strict=True):
    """(sum X_{t-1}^2)^a (rho_hat - rho0), divided by s_n (or by `scale` if given)."""
    x = np.asarray(x, dtype=float)
    xl = lag(x, x0)
    sxx = (xl * xl).sum(-1)
    r = _ratio((xl * x).sum(-1), sxx, strict, "sum of squared lagged regressor")
    out = sxx ** power * (r - rho0)
    if scale is not None:
        return out / scale
    if studentize:
        resid = x - np.asarray(r)[..., None] * xl
        s = np.sqrt((resid * resid).mean(-1))
        out = _ratio(out, s, strict, "residual scale")
    return out


def tn_unit_root(x, x0=0.0, strict=True):
    return selfnorm_ols_stat(x, x0, 1.0, 0.5, True, strict=strict)


def explosive_stat(x, x0=0.0, rho0=1.2, norm_at_estimate=True, strict=True):
    """(r^2-1)^{-1} |r|^n (rho_hat - rho0), evaluated in log space."""
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    rh = ols_ar1(x, x0, strict=strict)
    r = rh if norm_at_estimate else np.broadcast_to(rho0, np.shape(rh))
    d = rh - rho0
    with np.errstate(divide="ignore", invalid="ignore"):
        logmag = n * np.log(np.abs(r)) - np.log(np.abs(r * r - 1.0)) + np.log(np.abs(d))
        out = np.sign(d) * np.sign(r * r - 1.0) * np.exp(logmag)
    out = np.where(d == 0, 0.0, out)
    return out[()] if np.ndim(out) == 0 else out


def _need_ivx(fit: FitResult):
    if fit.method != "IVX" or fit.ivx is None:
        raise DomainError("statistic requires an IVX fit with its instrument parameters")


def psi_stat(fit: FitResult, n, beta0=0.0):
    _need_ivx(fit)
    return float(n) ** ((1.0 + fit.ivx.gamma_z) / 2.0) * (fit.beta_hat - beta0)


def jn_stat(fit: FitResult, beta0=0.0, power=1.0):
    _need_ivx(fit)
    if float(power) not in POWERS:
        raise DomainError(f"power must be one of {POWERS}")
    return fit.szx ** power * (fit.beta_hat - beta0)


def ivx_wald(fit: FitResult, beta0=0.0, strict=True):
    """(b - b0)^2 (sum ZX)^2 / (sigma_u^2 sum Z^2), sigma_u^2 with divisor n."""
    _need_ivx(fit)
    s2 = (fit.u_resid * fit.u_resid).mean(-1)
    d = fit.beta_hat - beta0
    return _ratio(d * d * fit.szx ** 2, s2 * fit.szz, strict, "instrument energy or residual variance")


def ivx_t(fit: FitResult, beta0=0.0, strict=True):
    w = ivx_wald(fit, beta0, strict=strict)
    return np.sign(fit.beta_hat - beta0) * np.sqrt(w)


def fm_t_stat(y, x, x0=0.0, beta0=0.0, bandwidth="auto"):
    """FM-OLS t-ratio for the scalar cointegrating slope; returns (beta_tilde, t)."""
    beta, V, _ = fm_ols_fit(y, x, x0=x0, bandwidth=bandwidth)
    if not V[0, 0] > 0:
        raise DegenerateError("non-positive FM-OLS variance")
    return float(beta[0]), float((beta[0] - beta0) / np.sqrt(V[0, 0]))


def compute(spec: StatSpec, y, x, x0=0.0, ivx: IvxParams = IvxParams(), strict=False):
    """Evaluate (estimate, statistic) for the statistic kind on a batch of series.

    The estimate is rho_hat for autoregressive kinds and beta_hat otherwise.
    """
    k = spec.kind
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    if k in RHO_KINDS:
        rh = ols_ar1(x, x0, strict=strict)
        if k == "selfnorm_ols":
            s = selfnorm_ols_stat(x, x0, spec.null_rho, spec.power, spec.studentize, strict=strict)
        elif k == "tn_unit_root":
            s = selfnorm_ols_stat(x, x0, spec.null_rho, 0.5, True, strict=strict)
        elif k == "n_ols":
            s = n * (rh - spec.null_rho)
        elif k == "sqrt_n_ols":
            s = np.sqrt(n) * (rh - spec.null_rho)
        else:
            s = explosive_stat(x, x0, spec.null_rho, spec.norm_at_estimate, strict=strict)
        return rh, s
    if k == "fm_t":
        y = np.asarray(y, dtype=float)
        if y.ndim == 1:
            return _fm_or_nan(y, x, x0, spec.null_beta, strict)
        pairs = [_fm_or_nan(yy, xx, x0, spec.null_beta, strict)
                 for yy, xx in zip(y.reshape(-1, n), x.reshape(-1, n))]
        est, st = (np.array(a).reshape(y.shape[:-1]) for a in zip(*pairs))
        return est, st
    fit = ivx_estimator(y, x, x0, ivx, strict=strict)
    if k == "psi_ivx":
        s = psi_stat(fit, n, spec.null_beta)
    elif k == "jn_ivx":
        s = jn_stat(fit, spec.null_beta, spec.power)
    elif k == "wald_ivx":
        s = ivx_wald(fit, spec.null_beta, strict=strict)
    else:
        s = ivx_t(fit, spec.null_beta, strict=strict)
    return fit.beta_hat, s


def _fm_or_nan(y, x, x0, beta0, strict):
    try:
        return fm_t_stat(y, x, x0, beta0)
    except DegenerateError:
        if strict:
            raise
        return np.nan, np.nan
