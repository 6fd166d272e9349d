"""Command-line interface: simulate, estimate, boot-test, mc, limits."""
from __future__ import annotations

import argparse
import json
import sys
import time

import numpy as np

from .bootstrap import BootstrapScheme, SCHEMES, TAILS, bootstrap_test
from .dgp import DgpSpec, Fixed, InnovationSpec, LocalToUnity, simulate_predictive_system
from .errors import ConfigError, DegenerateError, DomainError
from .estimators import IvxParams, ivx_estimator, ols_fit
from .harness import run_experiment
from .io import make_manifest, now_utc, parse_config, read_pair_csv, write_pair_csv, \
    write_report, write_timing
from .limitdist import KINDS, ReferenceSpec, reference_distribution
from .rng import Channel, substream
from .statistics import STAT_KINDS, StatSpec, ivx_t, ivx_wald

EXIT_OK, EXIT_USAGE, EXIT_CONFIG, EXIT_DEGENERATE = 0, 1, 2, 3
DEFAULT_QUANTILES = (0.01, 0.025, 0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95, 0.975, 0.99)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _floats(text):
    return tuple(float(t) for t in text.split(",") if t.strip())


def build_parser():
    p = _Parser(prog="predboot", description=__doc__)
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    s = sub.add_parser("simulate", help="simulate (y, x) from the predictive system")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--beta", type=float, default=0.0)
    s.add_argument("--c", type=float, default=0.0)
    s.add_argument("--gamma", type=float, default=1.0)
    s.add_argument("--rho", type=float, default=None, help="fixed root (overrides c, gamma)")
    s.add_argument("--sigma-u", type=float, default=1.0)
    s.add_argument("--sigma-v", type=float, default=1.0)
    s.add_argument("--sigma-uv", type=float, default=0.0)
    s.add_argument("--rho-u", type=float, default=0.0)
    s.add_argument("--ma-weights", type=_floats, default=(1.0,))
    s.add_argument("--x0", type=float, default=0.0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--output", default="-")

    def ivx_args(q):
        q.add_argument("--c-z", type=float, default=-1.0)
        q.add_argument("--gamma-z", type=float, default=0.95)

    e = sub.add_parser("estimate", help="OLS or IVX estimate on a (y, x) CSV")
    e.add_argument("--input", required=True)
    e.add_argument("--method", choices=("ols", "ivx"), default="ivx")
    e.add_argument("--beta0", type=float, default=0.0)
    e.add_argument("--json", action="store_true", help="print all estimates as JSON")
    ivx_args(e)

    b = sub.add_parser("boot-test", help="bootstrap p-value on a (y, x) CSV")
    b.add_argument("--input", required=True)
    b.add_argument("--scheme", choices=SCHEMES, default="wild")
    b.add_argument("--stat", choices=STAT_KINDS, default="wald_ivx")
    b.add_argument("--recenter", choices=("null", "estimate"), default="null")
    b.add_argument("--beta0", type=float, default=0.0)
    b.add_argument("--rho0", type=float, default=1.0)
    b.add_argument("--B", type=int, default=399)
    b.add_argument("--b", type=int, default=None, help="block length (rbb)")
    b.add_argument("--p", type=int, default=None, help="sieve order (default: AIC)")
    b.add_argument("--tail", choices=TAILS, default=None)
    b.add_argument("--seed", type=int, default=0)
    ivx_args(b)

    m = sub.add_parser("mc", help="run a Monte Carlo experiment from a JSON config")
    m.add_argument("--config", required=True)
    m.add_argument("--out", default="mc_out", help="output path prefix")
    m.add_argument("--format", choices=("csv", "json", "both"), default="both")
    m.add_argument("--threads", type=int, default=None)

    lim = sub.add_parser("limits", help="quantile table of a simulated limit distribution")
    lim.add_argument("--kind", choices=KINDS, required=True)
    lim.add_argument("--N", type=int, default=2000)
    lim.add_argument("--M", type=int, default=20000)
    lim.add_argument("--seed", type=int, default=0)
    lim.add_argument("--c", type=float, default=0.0)
    lim.add_argument("--gamma", type=float, default=float("inf"))
    lim.add_argument("--c-z", type=float, default=-1.0)
    lim.add_argument("--omega-xx", type=float, default=1.0)
    lim.add_argument("--unstudentized", action="store_true")
    lim.add_argument("--quantiles", type=_floats, default=DEFAULT_QUANTILES)
    lim.add_argument("--output", default="-")
    return p


def _out(path):
    return sys.stdout if path == "-" else open(path, "w", newline="")


def cmd_simulate(a):
    pers = Fixed(a.rho) if a.rho is not None else LocalToUnity(a.c, a.gamma)
    innov = InnovationSpec.from_moments(a.sigma_u, a.sigma_v, a.sigma_uv,
                                        ma_weights=a.ma_weights, error_ar=a.rho_u)
    spec = DgpSpec(beta=a.beta, persistence=pers, innovations=innov, n=a.n, x0=a.x0)
    pair = simulate_predictive_system(spec, substream(a.seed, 0, Channel.DATA))
    fh = _out(a.output)
    write_pair_csv(pair, fh)
    if fh is not sys.stdout:
        fh.close()


def cmd_estimate(a):
    d = read_pair_csv(a.input)
    if a.method == "ols":
        fit = ols_fit(d.y, d.x, d.x_prev0)
        info = {"method": "ols", "beta_hat": float(fit.beta_hat), "rho_hat": float(fit.rho_hat)}
    else:
        params = IvxParams(a.c_z, a.gamma_z)
        fit = ivx_estimator(d.y, d.x, d.x_prev0, params)
        # the Wald statistic is undefined on noiseless data; beta_hat still is
        w, t = (float(f(fit, a.beta0, strict=False)) for f in (ivx_wald, ivx_t))
        info = {"method": "ivx", "beta_hat": float(fit.beta_hat), "rho_hat": float(fit.rho_hat),
                "wald": w if np.isfinite(w) else None, "t": t if np.isfinite(t) else None}
    print(json.dumps(info) if a.json else f"{info['beta_hat']:.12g}")


def cmd_boot_test(a):
    d = read_pair_csv(a.input)
    stat = StatSpec(kind=a.stat, null_beta=a.beta0, null_rho=a.rho0,
                    power=0.5 if a.stat == "selfnorm_ols" else 1.0)
    scheme = BootstrapScheme(kind=a.scheme, recenter=a.recenter, b=a.b, p=a.p)
    est, obs, p, dist = bootstrap_test(d, stat, scheme, a.B, substream(a.seed, 0, Channel.BOOT),
                                       IvxParams(a.c_z, a.gamma_z), tail=a.tail)
    print(json.dumps({"stat": a.stat, "scheme": a.scheme, "estimate": est, "statistic": obs,
                      "pvalue": p, "B": a.B, "excluded": dist.excluded}))


def cmd_mc(a):
    cfg = parse_config(a.config)
    man = make_manifest(cfg)
    man.started = now_utc()
    t0 = time.perf_counter()
    rep = run_experiment(cfg, threads=a.threads)
    wall = time.perf_counter() - t0
    man.finished = now_utc()
    if a.format in ("csv", "both"):
        write_report(rep, f"{a.out}.csv", "csv", man)
    if a.format in ("json", "both"):
        write_report(rep, f"{a.out}.json", "json", man)
    write_timing(f"{a.out}.timing.json", man, wall)
    for agg in rep.aggregates:
        print(",".join(f"{k}={agg[k]:.6g}" if isinstance(agg[k], float) else f"{k}={agg[k]}"
                       for k in ("cell_id", "rejection_rate", "se", "ks", "excluded")))


def cmd_limits(a):
    spec = ReferenceSpec(kind=a.kind, N=a.N, M=a.M, c=a.c, gamma=a.gamma, c_z=a.c_z,
                         omega_xx=a.omega_xx, studentized=not a.unstudentized)
    dist = reference_distribution(spec, substream(a.seed, 0, Channel.REFERENCE))
    fh = _out(a.output)
    fh.write("q,value\n")
    for q in a.quantiles:
        fh.write(f"{q!r},{float(dist.quantile(q))!r}\n")
    if fh is not sys.stdout:
        fh.close()


COMMANDS = {"simulate": cmd_simulate, "estimate": cmd_estimate, "boot-test": cmd_boot_test,
            "mc": cmd_mc, "limits": cmd_limits}


def main(argv=None):
    parser = build_parser()
    try:
        a = parser.parse_args(argv)
        if a.command is None:
            raise UsageError(parser.format_help())
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    try:
        COMMANDS[a.command](a)
    except DegenerateError as exc:
        print(f"numeric degeneracy: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (ConfigError, DomainError, FileNotFoundError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
