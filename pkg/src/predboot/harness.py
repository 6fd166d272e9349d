"""Monte Carlo experiment engine.

Replications are processed in fixed-size chunks; each replication draws from
its own (seed, rep, channel) substream, so results do not depend on the
number of worker threads or on scheduling.
"""
from __future__ import annotations

import itertools
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import List, Optional

import numpy as np
from scipy import stats

from .bootstrap import (BootstrapScheme, bootstrap_pvalue, bootstrap_statistics, default_tail,
                        EXCLUDED_CAP, rbb_sample)
from .dgp import (InnovationSpec, TimeSeriesPair, innovations_from_base, lur_coefficient,
                  predictive_from_innovations, simulate_ar1)
from .empirical import EmpiricalDistribution, ks_distance
from .errors import ConfigError, DegenerateError
from .estimators import IvxParams, ols_ar1
from .limitdist import ReferenceSpec, reference_distribution
from .rng import GENERATOR_NAME, Channel, substream
from .statistics import StatSpec, compute

EXPERIMENTS = ("size_power", "pvalue_uniformity", "limit_match", "invalidity",
               "rbb_validity", "block_smoothing", "bootstrap_agreement")
ROW_FIELDS = ("experiment", "cell_id", "n", "c", "gamma", "beta", "sigma_uv", "rho_u",
              "method", "scheme", "rep", "estimate", "statistic", "pvalue", "reject")
AGG_FIELDS = ("cell_id", "rejection_rate", "se", "ks", "excluded")


@dataclass
class ExperimentConfig:
    experiment: str
    R: int
    seed: int
    n: List[int] = field(default_factory=lambda: [250])
    c: List[float] = field(default_factory=lambda: [0.0])
    gamma: List[float] = field(default_factory=lambda: [1.0])
    beta: List[float] = field(default_factory=lambda: [0.0])
    delta: Optional[List[float]] = None      # local alternatives beta = delta / n^((1+gamma_z)/2)
    rho: Optional[List[float]] = None        # fixed autoregressive roots (override c, gamma)
    sigma_uv: List[float] = field(default_factory=lambda: [0.0])
    rho_u: List[float] = field(default_factory=lambda: [0.0])
    sigma_u: float = 1.0
    sigma_v: float = 1.0
    ma_weights: List[float] = field(default_factory=lambda: [1.0])
    x0: float = 0.0
    method: str = "ivx"
    stat: str = "wald_ivx"
    power: float = 1.0
    studentize: bool = False
    null_beta: Optional[float] = 0.0         # None: the cell's true beta
    null_rho: Optional[float] = None         # None: the cell's true rho
    tail: Optional[str] = None
    scheme: Optional[str] = None
    recenter: str = "null"
    b: Optional[int] = None
    mu_hat: float = 0.0
    sieve_p: Optional[int] = None
    sieve_r: int = 100
    B: int = 399
    alpha: float = 0.05
    c_z: float = -1.0
    gamma_z: float = 0.95
    reference: Optional[str] = None
    ref_c: Optional[float] = None
    ref_gamma: Optional[float] = None        # None: the 1/(1-t) limit
    N: int = 2000
    M: int = 20000
    m: List[int] = field(default_factory=lambda: [1])   # block smoothing grid
    K: int = 50
    S: int = 100          # outer samples (bootstrap_agreement)
    chunk: int = 256

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError("experiment", f"must be one of {EXPERIMENTS}")
        if self.R < 1:
            raise ConfigError("R", "must be >= 1")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError("alpha", "must lie in (0, 1)")
        if self.scheme is not None and self.B < 1:
            raise ConfigError("B", "must be >= 1 when a bootstrap scheme is set")
        if self.chunk < 1:
            raise ConfigError("chunk", "must be >= 1")

    @property
    def ivx(self):
        return IvxParams(self.c_z, self.gamma_z)

    @property
    def stat_spec(self):
        return StatSpec(kind=self.stat, power=self.power, studentize=self.studentize,
                        null_beta=self.null_beta or 0.0,
                        null_rho=1.0 if self.null_rho is None else self.null_rho)

    @property
    def scheme_spec(self):
        if self.scheme is None:
            return None
        return BootstrapScheme(kind=self.scheme, recenter=self.recenter, b=self.b,
                               mu_hat=self.mu_hat, p=self.sieve_p, r=self.sieve_r)

    @property
    def reference_spec(self):
        if self.reference is None:
            return None
        return ReferenceSpec(kind=self.reference, N=self.N, M=self.M,
                             c=self.c[0] if self.ref_c is None else self.ref_c,
                             gamma=float("inf") if self.ref_gamma is None else self.ref_gamma,
                             c_z=self.c_z,
                             omega_xx=self.sigma_v ** 2, sigma_u=self.sigma_u)

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class Cell:
    cell_id: int
    n: int
    c: float
    gamma: float
    beta: float
    sigma_uv: float
    rho_u: float
    rho: float
    m: int = 1

    def innovations(self, cfg):
        return InnovationSpec.from_moments(cfg.sigma_u, cfg.sigma_v, self.sigma_uv,
                                           ma_weights=tuple(cfg.ma_weights), error_ar=self.rho_u)


@dataclass
class ExperimentReport:
    experiment: str
    config: dict
    rows: list = field(default_factory=list)         # tuples in ROW_FIELDS order
    aggregates: list = field(default_factory=list)   # dicts with AGG_FIELDS (+ "extras")
    summary: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def column(self, name, cell_id=None):
        i = ROW_FIELDS.index(name)
        return np.array([r[i] for r in self.rows if cell_id is None or r[1] == cell_id])

    def aggregate(self, cell_id):
        return next(a for a in self.aggregates if a["cell_id"] == cell_id)


def build_cells(cfg: ExperimentConfig):
    if not cfg.n:
        raise ConfigError("n", "grid is empty")
    cells = []
    if cfg.experiment == "block_smoothing":
        for m, c in itertools.product(cfg.m, cfg.c):
            n = m * cfg.K
            cells.append(Cell(len(cells), n, c, 1.0, 0.0, cfg.sigma_uv[0], cfg.rho_u[0],
                              1.0 + c * m / n, m))
        return cells
    if cfg.rho is not None:
        pers = [(r - 1.0, 0.0, r) for r in cfg.rho]       # rho = 1 + c / n^0
    else:
        pers = [(c, g, None) for c, g in itertools.product(cfg.c, cfg.gamma)]
    slopes = cfg.delta if cfg.delta is not None else cfg.beta
    for n, (c, g, r), s, suv, ru in itertools.product(cfg.n, pers, slopes, cfg.sigma_uv, cfg.rho_u):
        rho = r if r is not None else lur_coefficient(c, g, n)
        beta = s / n ** ((1.0 + cfg.gamma_z) / 2.0) if cfg.delta is not None else s
        cells.append(Cell(len(cells), n, c, g, beta, suv, ru, rho))
    if not cells:
        raise ConfigError("n", "configuration grid is empty")
    return cells


def _threads(threads):
    if threads is None:
        threads = int(os.environ.get("PREDBOOT_THREADS", "1"))
    return max(1, int(threads))


def _base_draws(cfg, cell, reps, base_hook=None):
    L = len(cfg.ma_weights) - 1
    shape = (cell.n + L, 2)
    if base_hook is not None:
        return np.stack([np.asarray(base_hook(r, shape), dtype=float) for r in reps])
    return np.stack([substream(cfg.seed, r, Channel.DATA).standard_normal(shape) for r in reps])


def _simulate(cfg, cell, reps, base_hook=None):
    u, v = innovations_from_base(cell.innovations(cfg), _base_draws(cfg, cell, reps, base_hook))
    return predictive_from_innovations(cell.beta, cell.rho, u, v, cfg.x0)


def _nulls(cfg, cell):
    nb = cell.beta if cfg.null_beta is None else cfg.null_beta
    nr = cell.rho if cfg.null_rho is None else cfg.null_rho
    return cfg.stat_spec.with_nulls(null_beta=nb, null_rho=nr)


def _asymptotic_pvalue(kind, s, tail, ref):
    if kind == "wald_ivx":
        return stats.chi2.sf(s, 1)
    if kind in ("t_ivx", "fm_t"):
        return 2.0 * stats.norm.sf(np.abs(s))
    if ref is None:
        raise ConfigError("reference", f"statistic {kind!r} needs a reference distribution "
                                       "or a bootstrap scheme for p-values")
    s = np.atleast_1d(np.asarray(s, dtype=float))
    if callable(ref):
        F = ref(s)
        if tail == "left":
            return F
        if tail == "right":
            return 1.0 - F
        return np.minimum(2.0 * (1.0 - ref(np.abs(s))), 1.0)   # symmetric reference
    return np.array([bootstrap_pvalue(ref, float(v), tail) if np.isfinite(v) else np.nan
                     for v in s])


def _row(cfg, cell, rep, est, s, p, rej, scheme_name):
    return (cfg.experiment, cell.cell_id, cell.n, float(cell.c), float(cell.gamma),
            float(cell.beta), float(cell.sigma_uv), float(cell.rho_u), cfg.method,
            scheme_name, int(rep), float(est), float(s), float(p), int(rej))


class _Runner:
    """Shared chunk scheduling and row assembly."""

    def __init__(self, cfg, threads=None):
        self.cfg = cfg
        self.threads = _threads(threads)
        self.cells = build_cells(cfg)
        self._refs = {}

    def reference(self, spec: Optional[ReferenceSpec]):
        if spec is None:
            return None
        if spec.analytic_cdf is not None:
            return spec.analytic_cdf
        if spec not in self._refs:
            self._refs[spec] = reference_distribution(spec, substream(self.cfg.seed, 0, Channel.REFERENCE))
        return self._refs[spec]

    def map_chunks(self, fn):
        """fn(cell, reps) -> list of per-rep results; returns {cell_id: results in rep order}."""
        cfg = self.cfg
        tasks = [(cell, range(s, min(s + cfg.chunk, cfg.R)))
                 for cell in self.cells for s in range(0, cfg.R, cfg.chunk)]
        if self.threads == 1:
            outs = [fn(c, r) for c, r in tasks]
        else:
            with ThreadPoolExecutor(self.threads) as ex:
                outs = list(ex.map(lambda t: fn(*t), tasks))
        res = {c.cell_id: [] for c in self.cells}
        for (cell, _), out in zip(tasks, outs):
            res[cell.cell_id].extend(out)
        return res


def _finalize(report, t0):
    report.meta["wall_time_s"] = time.perf_counter() - t0
    return report


def _new_report(cfg):
    return ExperimentReport(experiment=cfg.experiment, config=cfg.to_dict(),
                            meta={"seed": cfg.seed, "generator": GENERATOR_NAME})


def _rate_and_se(rej):
    R = len(rej)
    p = float(np.mean(rej)) if R else 0.0
    return p, float(np.sqrt(p * (1.0 - p) / R)) if R else 0.0


def run_size_power(cfg: ExperimentConfig, threads=None, base_hook=None, pvalue_oracle=None):
    """Rejection frequencies per cell, with asymptotic or bootstrap p-values.

    `pvalue_oracle(rep) -> p` replaces the test entirely (used to validate the
    uniformity machinery on exactly uniform p-values).
    """
    t0 = time.perf_counter()
    run = _Runner(cfg, threads)
    scheme = cfg.scheme_spec
    ref = run.reference(cfg.reference_spec)
    if scheme is None and ref is None and pvalue_oracle is None and cfg.stat not in ("wald_ivx", "t_ivx", "fm_t"):
        raise ConfigError("reference", f"statistic {cfg.stat!r} needs a reference or a scheme")
    tail = cfg.tail or default_tail(cfg.stat)
    scheme_name = cfg.scheme or "asymptotic"

    def work(cell, reps):
        spec = _nulls(cfg, cell)
        y, x = _simulate(cfg, cell, reps, base_hook)
        est, s = compute(spec, y, x, cfg.x0, cfg.ivx, strict=False)
        est, s = np.atleast_1d(est), np.atleast_1d(s)
        out = []
        if pvalue_oracle is not None:
            pv = np.array([pvalue_oracle(r) for r in reps])
            excl = np.zeros(len(reps), int)
        elif scheme is None:
            pv = np.atleast_1d(_asymptotic_pvalue(cfg.stat, s, tail, ref))
            excl = np.zeros(len(reps), int)
        else:
            pv = np.full(len(reps), np.nan)
            excl = np.zeros(len(reps), int)
            for i, r in enumerate(reps):
                if not np.isfinite(s[i]):
                    continue
                data = TimeSeriesPair(y=y[i], x=x[i], x_prev0=cfg.x0)
                try:
                    bst = bootstrap_statistics(data, spec, scheme, cfg.B,
                                               substream(cfg.seed, r, Channel.BOOT), cfg.ivx)
                except DegenerateError:
                    continue
                ok = np.isfinite(bst)
                excl[i] = cfg.B - int(ok.sum())
                if excl[i] > EXCLUDED_CAP * cfg.B or not ok.any():
                    continue
                pv[i] = bootstrap_pvalue(np.sort(bst[ok]), float(s[i]), tail)
        for i, r in enumerate(reps):
            out.append((est[i], s[i], pv[i], excl[i]))
        return out

    res = run.map_chunks(work)
    report = _new_report(cfg)
    for cell in run.cells:
        r_cell = res[cell.cell_id]
        rows = []
        for rep, (e, s, p, _) in enumerate(r_cell):
            rej = int(np.isfinite(p) and p <= cfg.alpha)
            rows.append(_row(cfg, cell, rep, e, s, p, rej, scheme_name))
        report.rows.extend(rows)
        pv = np.array([r[13] for r in rows])
        valid = np.isfinite(pv)
        rate, se = _rate_and_se([r[14] for r in rows if np.isfinite(r[13])])
        excluded = int((~valid).sum())
        report.aggregates.append({
            "cell_id": cell.cell_id, "rejection_rate": rate, "se": se,
            "ks": ks_distance(pv[valid], stats.uniform.cdf) if valid.any() else float("nan"),
            "excluded": excluded,
            "extras": {"bootstrap_resamples_excluded": int(sum(x[3] for x in r_cell))},
        })
        if excluded > EXCLUDED_CAP * cfg.R and pvalue_oracle is None:
            report.summary.setdefault("warnings", []).append(
                f"cell {cell.cell_id}: {excluded} of {cfg.R} replications excluded")
    return _finalize(report, t0)


def run_pvalue_uniformity(cfg: ExperimentConfig, threads=None, base_hook=None, pvalue_oracle=None):
    """Bootstrap p-values under the null; the `ks` aggregate is the distance to Uniform[0,1]."""
    if cfg.scheme is None and pvalue_oracle is None:
        raise ConfigError("scheme", "p-value uniformity needs a bootstrap scheme")
    return run_size_power(cfg, threads, base_hook, pvalue_oracle)


def run_limit_match(cfg: ExperimentConfig, threads=None, base_hook=None):
    """Finite-sample statistic versus its limit law (KS), plus moments of the statistic."""
    t0 = time.perf_counter()
    run = _Runner(cfg, threads)

    def work(cell, reps):
        y, x = _simulate(cfg, cell, reps, base_hook)
        est, s = compute(_nulls(cfg, cell), y, x, cfg.x0, cfg.ivx, strict=False)
        return list(zip(np.atleast_1d(est), np.atleast_1d(s)))

    res = run.map_chunks(work)
    report = _new_report(cfg)
    for cell in run.cells:
        spec = cfg.reference_spec
        if spec is not None and spec.kind == "ouratio" and cfg.ref_c is None:
            spec = ReferenceSpec(**{**asdict(spec), "c": cell.c})
        ref = run.reference(spec)
        vals = np.array([s for _, s in res[cell.cell_id]], dtype=float)
        for rep, (e, s) in enumerate(res[cell.cell_id]):
            report.rows.append(_row(cfg, cell, rep, e, s, float("nan"), 0, "none"))
        ok = np.isfinite(vals)
        report.aggregates.append({
            "cell_id": cell.cell_id, "rejection_rate": 0.0, "se": 0.0,
            "ks": ks_distance(vals[ok], ref) if ref is not None and ok.any() else float("nan"),
            "excluded": int((~ok).sum()),
            "extras": {"mean": float(vals[ok].mean()), "variance": float(vals[ok].var(ddof=1))},
        })
    return _finalize(report, t0)


def run_invalidity_demo(cfg: ExperimentConfig, threads=None, base_hook=None, boot_stream_hook=None):
    """Across-sample dispersion of the bootstrap 5th percentile at each n.

    `boot_stream_hook(rep) -> Generator` overrides the per-sample bootstrap
    stream (with identical data this gives a zero-dispersion sanity floor).
    """
    t0 = time.perf_counter()
    run = _Runner(cfg, threads)
    scheme = cfg.scheme_spec or BootstrapScheme("iid", recenter="estimate")
    tail = cfg.tail or default_tail(cfg.stat)
    ref = run.reference(cfg.reference_spec)

    def work(cell, reps):
        spec = _nulls(cfg, cell)
        y, x = _simulate(cfg, cell, reps, base_hook)
        est, s = compute(spec, y, x, cfg.x0, cfg.ivx, strict=False)
        est, s = np.atleast_1d(est), np.atleast_1d(s)
        out = []
        for i, r in enumerate(reps):
            data = TimeSeriesPair(y=y[i], x=x[i], x_prev0=cfg.x0)
            rng = boot_stream_hook(r) if boot_stream_hook else substream(cfg.seed, r, Channel.BOOT)
            bst = bootstrap_statistics(data, spec, scheme, cfg.B, rng, cfg.ivx)
            ok = np.isfinite(bst)
            d = EmpiricalDistribution(bst[ok]) if ok.any() else None
            q = float(d.quantile(0.05)) if d is not None else float("nan")
            p = bootstrap_pvalue(d, float(s[i]), tail) if d is not None else float("nan")
            out.append((q, s[i], p, cfg.B - int(ok.sum()), bst[ok]))
        return out

    res = run.map_chunks(work)
    report = _new_report(cfg)
    sds = {}
    for cell in run.cells:
        r_cell = res[cell.cell_id]
        for rep, (q, s, p, _, _) in enumerate(r_cell):
            report.rows.append(_row(cfg, cell, rep, q, s, p, int(np.isfinite(p) and p <= cfg.alpha),
                                    scheme.kind))
        qs = np.array([o[0] for o in r_cell])
        ok = np.isfinite(qs)
        sd = float(qs[ok].std(ddof=1)) if ok.sum() > 1 else 0.0
        sds[cell.cell_id] = sd
        pooled = np.concatenate([o[4] for o in r_cell])
        rej = [row[14] for row in report.rows if row[1] == cell.cell_id]
        rate, se = _rate_and_se(rej)
        report.aggregates.append({
            "cell_id": cell.cell_id, "rejection_rate": rate, "se": se,
            "ks": ks_distance(pooled, ref) if ref is not None and pooled.size else float("nan"),
            "excluded": int((~ok).sum()),
            "extras": {"sd_q05": sd, "mean_q05": float(qs[ok].mean()) if ok.any() else float("nan"),
                       "bootstrap_resamples_excluded": int(sum(o[3] for o in r_cell))},
        })
    # dispersion ratio between the largest and smallest n, per remaining grid point
    by_rest = {}
    for cell in run.cells:
        key = (cell.c, cell.gamma, cell.beta, cell.sigma_uv, cell.rho_u)
        by_rest.setdefault(key, []).append(cell)
    ratios = []
    for cells in by_rest.values():
        lo, hi = min(cells, key=lambda c: c.n), max(cells, key=lambda c: c.n)
        if lo.n != hi.n:
            ratios.append(sds[hi.cell_id] / sds[lo.cell_id] if sds[lo.cell_id] > 0 else float("nan"))
    report.summary["sd_ratio"] = ratios
    return _finalize(report, t0)


def run_rbb_validity(cfg: ExperimentConfig, threads=None, base_hook=None):
    """Per sample: KS between the block-bootstrap law of l(rho*-1) and the reference."""
    t0 = time.perf_counter()
    run = _Runner(cfg, threads)
    scheme = cfg.scheme_spec
    if scheme is None or scheme.kind != "rbb":
        raise ConfigError("scheme", "rbb_validity needs scheme = 'rbb' with a block length b")
    ref = run.reference(cfg.reference_spec or ReferenceSpec("dfratio", N=cfg.N, M=cfg.M))
    spec0 = StatSpec("n_ols", null_rho=1.0)
    tail = cfg.tail or "left"

    def work(cell, reps):
        y, x = _simulate(cfg, cell, reps, base_hook)
        est, s = compute(spec0, y, x, cfg.x0, cfg.ivx, strict=False)
        out = []
        for i, r in enumerate(reps):
            data = TimeSeriesPair(y=y[i], x=x[i], x_prev0=cfg.x0)
            bst = bootstrap_statistics(data, spec0, scheme, cfg.B,
                                       substream(cfg.seed, r, Channel.BOOT), cfg.ivx)
            ok = np.isfinite(bst)
            d = np.sort(bst[ok])
            out.append((est[i], s[i], bootstrap_pvalue(d, float(s[i]), tail),
                        ks_distance(d, ref), cfg.B - int(ok.sum())))
        return out

    res = run.map_chunks(work)
    report = _new_report(cfg)
    for cell in run.cells:
        r_cell = res[cell.cell_id]
        for rep, (e, s, p, _, _) in enumerate(r_cell):
            report.rows.append(_row(cfg, cell, rep, e, s, p, int(p <= cfg.alpha), "rbb"))
        ks = np.array([o[3] for o in r_cell])
        rate, se = _rate_and_se([row[14] for row in report.rows if row[1] == cell.cell_id])
        report.aggregates.append({
            "cell_id": cell.cell_id, "rejection_rate": rate, "se": se,
            "ks": float(np.median(ks)), "excluded": 0,
            "extras": {"ks_per_sample": ks.tolist(),
                       "bootstrap_resamples_excluded": int(sum(o[4] for o in r_cell))},
        })
    return _finalize(report, t0)


def rbb_fclt_check(m=2000, draws=20000, b=25, seed=0, chunk=500):
    """KS between the block-bootstrap partial-sum endpoint S*_m(1) and N(0,1).

    Each draw feeds a fresh centered white-noise residual sequence of length m
    through the block resampler and standardizes the endpoint by the residual
    scale.
    """
    k = m // b
    vals = np.empty(draws)
    dummy = np.zeros(m + 1)
    for j in range(draws):
        rng = substream(seed, j, Channel.AUX)
        e = rng.standard_normal(m)
        e -= e.mean()
        xs = rbb_sample(dummy, 0.0, 1.0, b, 0.0, rng, residuals=e)
        vals[j] = xs[-1] / (np.sqrt((e * e).mean()) * np.sqrt(k * b))
    return ks_distance(vals, stats.norm.cdf), vals


def run_block_smoothing(cfg: ExperimentConfig, threads=None, base_hook=None):
    """Variance of (n / sqrt(m)) (rho_hat - rho) for rho = 1 + c m / n over the m grid."""
    t0 = time.perf_counter()
    run = _Runner(cfg, threads)

    def work(cell, reps):
        _, v = innovations_from_base(cell.innovations(cfg), _base_draws(cfg, cell, reps, base_hook))
        x = simulate_ar1(cell.rho, v, cfg.x0)
        rh = ols_ar1(x, cfg.x0, strict=False)
        return list(zip(np.atleast_1d(rh), np.atleast_1d(cell.n / np.sqrt(cell.m) * (rh - cell.rho))))

    res = run.map_chunks(work)
    report = _new_report(cfg)
    for cell in run.cells:
        vals = np.array([s for _, s in res[cell.cell_id]])
        for rep, (e, s) in enumerate(res[cell.cell_id]):
            report.rows.append(_row(cfg, cell, rep, e, s, float("nan"), 0, "none"))
        ok = np.isfinite(vals)
        var = float(vals[ok].var(ddof=1)) if ok.sum() > 1 else 0.0
        target = -2.0 * cell.c
        ks = ks_distance(vals[ok], stats.norm(scale=np.sqrt(target)).cdf) if ok.any() else float("nan")
        report.aggregates.append({
            "cell_id": cell.cell_id, "rejection_rate": 0.0, "se": 0.0, "ks": ks,
            "excluded": int((~ok).sum()),
            "extras": {"m": cell.m, "K": cfg.K, "variance": var, "target": target},
        })
    return _finalize(report, t0)


def run_bootstrap_agreement(cfg: ExperimentConfig, threads=None, base_hook=None):
    """Per sample: KS between the bootstrap law of the statistic and its Monte Carlo law.

    The Monte Carlo law uses replications 0..R-1; the S outer samples use
    replications R..R+S-1, so the two are independent.
    """
    t0 = time.perf_counter()
    run = _Runner(cfg, threads)
    scheme = cfg.scheme_spec
    if scheme is None:
        raise ConfigError("scheme", "bootstrap_agreement needs a bootstrap scheme")
    if cfg.S < 1:
        raise ConfigError("S", "must be >= 1")
    tail = cfg.tail or default_tail(cfg.stat)

    def mc_work(cell, reps):
        y, x = _simulate(cfg, cell, reps, base_hook)
        _, s = compute(_nulls(cfg, cell), y, x, cfg.x0, cfg.ivx, strict=False)
        return list(np.atleast_1d(s))

    mc = run.map_chunks(mc_work)
    outer = range(cfg.R, cfg.R + cfg.S)

    def sample_work(cell):
        spec = _nulls(cfg, cell)
        target = np.sort(np.array(mc[cell.cell_id], dtype=float))
        target = target[np.isfinite(target)]
        y, x = _simulate(cfg, cell, outer, base_hook)
        est, s = compute(spec, y, x, cfg.x0, cfg.ivx, strict=False)
        out = []
        for i, r in enumerate(outer):
            data = TimeSeriesPair(y=y[i], x=x[i], x_prev0=cfg.x0)
            bst = bootstrap_statistics(data, spec, scheme, cfg.B,
                                       substream(cfg.seed, r, Channel.BOOT), cfg.ivx)
            ok = np.isfinite(bst)
            d = np.sort(bst[ok])
            p = bootstrap_pvalue(d, float(s[i]), tail) if d.size else float("nan")
            k = ks_distance(d, target) if d.size else float("nan")
            out.append((est[i], s[i], p, k, cfg.B - int(ok.sum())))
        return out

    if run.threads == 1:
        outs = [sample_work(c) for c in run.cells]
    else:
        with ThreadPoolExecutor(run.threads) as ex:
            outs = list(ex.map(sample_work, run.cells))
    report = _new_report(cfg)
    for cell, r_cell in zip(run.cells, outs):
        for j, (e, s, p, _, _) in enumerate(r_cell):
            report.rows.append(_row(cfg, cell, cfg.R + j, e, s, p,
                                    int(np.isfinite(p) and p <= cfg.alpha), scheme.kind))
        ks = np.array([o[3] for o in r_cell])
        rate, se = _rate_and_se([row[14] for row in report.rows if row[1] == cell.cell_id])
        report.aggregates.append({
            "cell_id": cell.cell_id, "rejection_rate": rate, "se": se,
            "ks": float(np.nanmedian(ks)), "excluded": int(np.isnan(ks).sum()),
            "extras": {"ks_per_sample": ks.tolist(), "mc_replications": cfg.R,
                       "bootstrap_resamples_excluded": int(sum(o[4] for o in r_cell))},
        })
    return _finalize(report, t0)


RUNNERS = {
    "size_power": run_size_power,
    "pvalue_uniformity": run_pvalue_uniformity,
    "limit_match": run_limit_match,
    "invalidity": run_invalidity_demo,
    "rbb_validity": run_rbb_validity,
    "block_smoothing": run_block_smoothing,
    "bootstrap_agreement": run_bootstrap_agreement,
}


def run_experiment(cfg: ExperimentConfig, threads=None):
    return RUNNERS[cfg.experiment](cfg, threads=threads)
