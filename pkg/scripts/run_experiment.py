"""Run one or more experiment configs and write reports.

    python3 scripts/run_experiment.py                    # every config in scripts/configs
    python3 scripts/run_experiment.py configs/ivx_size.json --outdir results
"""
import argparse
import time
from pathlib import Path

from predboot.harness import run_experiment
from predboot.io import make_manifest, now_utc, parse_config, write_report, write_timing

HERE = Path(__file__).resolve().parent


def summarize(rep):
    for a in rep.aggregates:
        ex = a.get("extras", {})
        extra = ", ".join(f"{k}={v:.4g}" for k, v in ex.items() if isinstance(v, float))
        print(f"  cell {a['cell_id']}: rejection={a['rejection_rate']:.4f} (se {a['se']:.4f}) "
              f"ks={a['ks']:.4f} excluded={a['excluded']}" + (f" [{extra}]" if extra else ""))
    if rep.summary:
        print(f"  summary: {rep.summary}")


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("configs", nargs="*", type=Path)
    ap.add_argument("--outdir", type=Path, default=Path("results"))
    ap.add_argument("--threads", type=int, default=None)
    args = ap.parse_args()
    paths = args.configs or sorted((HERE / "configs").glob("*.json"))
    args.outdir.mkdir(parents=True, exist_ok=True)
    for path in paths:
        cfg = parse_config(path)
        man = make_manifest(cfg)
        man.started = now_utc()
        t0 = time.perf_counter()
        rep = run_experiment(cfg, threads=args.threads)
        wall = time.perf_counter() - t0
        man.finished = now_utc()
        stem = args.outdir / path.stem
        write_report(rep, stem.with_suffix(".csv"), "csv", man)
        write_report(rep, stem.with_suffix(".json"), "json", man)
        write_timing(f"{stem}.timing.json", man, wall)
        print(f"{path.stem} ({cfg.experiment}, {wall:.1f}s)")
        summarize(rep)


if __name__ == "__main__":
    main()
