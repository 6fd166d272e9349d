"""Configuration parsing, run manifests and report / series serialization."""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .bootstrap import RECENTER, SCHEMES, TAILS
from .dgp import TimeSeriesPair
from .errors import ConfigError
from .harness import AGG_FIELDS, EXPERIMENTS, ROW_FIELDS, ExperimentConfig, ExperimentReport
from .limitdist import KINDS as REFERENCE_KINDS
from .rng import GENERATOR_NAME
from .statistics import POWERS, STAT_KINDS

ALIASES = {"size": "size_power", "power": "size_power", "pvalue": "pvalue_uniformity",
           "limit": "limit_match", "rbb": "rbb_validity", "smoothing": "block_smoothing",
           "agreement": "bootstrap_agreement"}
_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}
_INT_LISTS = {"n", "m"}
_FLOAT_LISTS = {"c", "gamma", "beta", "delta", "rho", "sigma_uv", "rho_u", "ma_weights"}
_INTS = {"R", "seed", "B", "b", "sieve_p", "sieve_r", "N", "M", "K", "S", "chunk"}
_BOOLS = {"studentize"}
_STRINGS = {"experiment": EXPERIMENTS, "stat": STAT_KINDS, "scheme": SCHEMES,
            "recenter": RECENTER, "reference": REFERENCE_KINDS, "tail": TAILS,
            "method": ("ivx", "ols")}


def _no_duplicates(pairs):
    out = {}
    for k, v in pairs:
        if k in out:
            raise ConfigError(k, "duplicate key")
        out[k] = v
    return out


def _num(key, v, integer=False):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(key, f"expected a number, got {v!r}")
    if integer:
        if isinstance(v, float) and not v.is_integer():
            raise ConfigError(key, f"expected an integer, got {v!r}")
        return int(v)
    if not math.isfinite(v):
        raise ConfigError(key, "must be finite")
    return float(v)


def _coerce(key, v):
    if v is None:
        if "Optional" in str(_FIELDS[key].type):
            return None
        raise ConfigError(key, "must not be null")
    if key in _INT_LISTS or key in _FLOAT_LISTS:
        items = v if isinstance(v, list) else [v]
        if not items:
            raise ConfigError(key, "grid must not be empty")
        return [_num(f"{key}[{i}]", a, key in _INT_LISTS) for i, a in enumerate(items)]
    if key in _INTS:
        return _num(key, v, integer=True)
    if key in _BOOLS:
        if not isinstance(v, bool):
            raise ConfigError(key, "expected true or false")
        return v
    if key in _STRINGS:
        if key == "experiment" and v in ALIASES:
            v = ALIASES[v]
        if v not in _STRINGS[key]:
            raise ConfigError(key, f"must be one of {list(_STRINGS[key])}, got {v!r}")
        return v
    return _num(key, v)


def _check_domains(d):
    def bad(key, msg):
        raise ConfigError(key, msg)

    for i, n in enumerate(d.get("n", [])):
        if n < 4:
            bad(f"n[{i}]", "sample size must be >= 4")
    for i, g in enumerate(d.get("gamma", [])):
        if not 0.0 < g <= 1.0:
            bad(f"gamma[{i}]", "must lie in (0, 1]")
    if "gamma_z" in d and not 0.0 < d["gamma_z"] < 1.0:
        bad("gamma_z", "must lie in (0, 1)")
    if "c_z" in d and not d["c_z"] < 0.0:
        bad("c_z", "must be negative")
    for key in ("sigma_u", "sigma_v"):
        if key in d and not d[key] > 0.0:
            bad(key, "must be positive")
    su, sv = d.get("sigma_u", 1.0), d.get("sigma_v", 1.0)
    for i, s in enumerate(d.get("sigma_uv", [])):
        if abs(s) > su * sv:
            bad(f"sigma_uv[{i}]", "covariance matrix would not be positive semi-definite")
    for i, r in enumerate(d.get("rho_u", [])):
        if not -1.0 < r < 1.0:
            bad(f"rho_u[{i}]", "must lie in (-1, 1)")
    if "alpha" in d and not 0.0 < d["alpha"] < 1.0:
        bad("alpha", "must lie in (0, 1)")
    if "power" in d and d["power"] not in POWERS:
        bad("power", f"must be one of {POWERS}")
    for key, lo in (("R", 1), ("B", 1), ("M", 1), ("N", 16), ("K", 1), ("S", 1), ("chunk", 1), ("sieve_r", 0)):
        if key in d and d[key] < lo:
            bad(key, f"must be >= {lo}")
    if "seed" in d and not 0 <= d["seed"] < 2 ** 64:
        bad("seed", "must be a 64-bit unsigned integer")
    for i, m in enumerate(d.get("m", [])):
        if m < 1:
            bad(f"m[{i}]", "must be >= 1")
    if d.get("scheme") == "rbb":
        if d.get("b") is None:
            bad("b", "block length required for the rbb scheme")
        if not 1 <= d["b"] < min(d.get("n", [250])):
            bad("b", "must satisfy 1 <= b < n")
    if d.get("experiment") == "block_smoothing":
        for i, c in enumerate(d.get("c", [0.0])):
            if not c < 0:
                bad(f"c[{i}]", "block smoothing requires c < 0")
    ma = d.get("ma_weights")
    if ma is not None and len(ma) > 1 and sum(ma) == 0:
        bad("ma_weights", "weights must not sum to zero")


def config_from_dict(raw) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "configuration must be a JSON object")
    d = {}
    for k, v in raw.items():
        if k not in _FIELDS:
            raise ConfigError(k, "unknown key")
        d[k] = _coerce(k, v)
    for k in ("experiment", "R", "seed"):
        if k not in d:
            raise ConfigError(k, "required key missing")
    _check_domains(d)
    return ExperimentConfig(**d)


def parse_config(path) -> ExperimentConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(str(path), "configuration file not found")
    try:
        raw = json.loads(p.read_text(), object_pairs_hook=_no_duplicates)
    except json.JSONDecodeError as exc:
        raise ConfigError(str(path), f"malformed JSON: {exc}") from exc
    return config_from_dict(raw)


# --- manifest ---------------------------------------------------------------

def _canonical(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def config_digest(cfg: ExperimentConfig):
    return hashlib.sha256(_canonical(cfg.to_dict()).encode()).hexdigest()


@dataclass
class RunManifest:
    config_digest: str
    seed: int
    generator: str = GENERATOR_NAME
    version: str = __version__
    deterministic: bool = True
    started: str = ""
    finished: str = ""

    def hashed_payload(self):
        """Everything except timestamps; embedded in data files."""
        d = dataclasses.asdict(self)
        d.pop("started")
        d.pop("finished")
        return d


def make_manifest(cfg: ExperimentConfig):
    return RunManifest(config_digest=config_digest(cfg), seed=cfg.seed)


def now_utc():
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


# --- reports ----------------------------------------------------------------

def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


_ROW_TYPES = (str, int, int, float, float, float, float, float, str, str, int, float, float, float, int)


def _aggregate_paths(path):
    p = Path(path)
    return p.with_name(p.stem + "_aggregate" + p.suffix)


def write_report(report: ExperimentReport, path, fmt="csv", manifest: RunManifest = None):
    """CSV: rows at `path` plus `<stem>_aggregate.csv`. JSON: one document with the manifest."""
    path = Path(path)
    if fmt == "csv":
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(ROW_FIELDS)
            for r in report.rows:
                w.writerow([_fmt(v) for v in r])
        with open(_aggregate_paths(path), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(AGG_FIELDS)
            for a in report.aggregates:
                w.writerow([_fmt(a[k]) for k in AGG_FIELDS])
        return
    if fmt != "json":
        raise ValueError(f"unknown report format {fmt!r}")
    doc = {
        "experiment": report.experiment,
        "manifest": (manifest.hashed_payload() if manifest is not None else None),
        "config": report.config,
        "columns": list(ROW_FIELDS),
        "rows": [[_json_val(v) for v in r] for r in report.rows],
        "aggregates": [_json_tree(a) for a in report.aggregates],
        "summary": _json_tree(report.summary),
    }
    path.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")


def _json_val(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        f = float(v)
        return f if math.isfinite(f) else None
    return v


def _json_tree(obj):
    if isinstance(obj, dict):
        return {k: _json_tree(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_tree(v) for v in obj]
    return _json_val(obj)


def _row_from_json(r):
    return tuple(float("nan") if v is None else t(v) for t, v in zip(_ROW_TYPES, r))


def _tree_from_json(obj):
    if isinstance(obj, dict):
        return {k: _tree_from_json(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_tree_from_json(v) for v in obj]
    return float("nan") if obj is None else obj


def read_report(path) -> ExperimentReport:
    doc = json.loads(Path(path).read_text())
    return ExperimentReport(experiment=doc["experiment"], config=doc["config"],
                            rows=[_row_from_json(r) for r in doc["rows"]],
                            aggregates=_tree_from_json(doc["aggregates"]),
                            summary=_tree_from_json(doc["summary"]),
                            meta={"manifest": doc.get("manifest")})


def read_rows_csv(path):
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        header = next(rd)
        if tuple(header) != ROW_FIELDS:
            raise ValueError("unexpected column layout")
        return [tuple(t(v) for t, v in zip(_ROW_TYPES, row)) for row in rd]


def write_timing(path, manifest: RunManifest, wall_time_s):
    """Timestamps live in a sidecar so data files stay byte-identical across runs."""
    Path(path).write_text(json.dumps({"started": manifest.started, "finished": manifest.finished,
                                      "wall_time_s": wall_time_s}, indent=1) + "\n")


# --- time-series files ----------------------------------------------------------

def write_pair_csv(pair: TimeSeriesPair, path_or_fh):
    own = isinstance(path_or_fh, (str, Path))
    fh = open(path_or_fh, "w", newline="") if own else path_or_fh
    try:
        fh.write(f"# x0={float(pair.x_prev0)!r}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["y", "x"])
        for yy, xx in zip(pair.y, pair.x):
            w.writerow([repr(float(yy)), repr(float(xx))])
    finally:
        if own:
            fh.close()


def read_pair_csv(path) -> TimeSeriesPair:
    """Columns y, x; an optional first line `# x0=<value>` sets X_0 (default 0)."""
    lines = Path(path).read_text().splitlines()
    x0 = 0.0
    if lines and lines[0].startswith("#"):
        meta = lines.pop(0).lstrip("#").strip()
        if meta:
            key, _, val = meta.partition("=")
            if key.strip() != "x0":
                raise ConfigError("x0", f"unrecognized metadata line {meta!r}")
            try:
                x0 = float(val)
            except ValueError as exc:
                raise ConfigError("x0", f"not a number: {val!r}") from exc
    rows = list(csv.reader(lines))
    if not rows:
        raise ConfigError(str(path), "empty series file")
    header = [h.strip().lower() for h in rows[0]]
    if header[:2] != ["y", "x"]:
        raise ConfigError(str(path), "expected header 'y,x'")
    try:
        data = np.array([[float(r[0]), float(r[1])] for r in rows[1:] if r], dtype=float)
    except (ValueError, IndexError) as exc:
        raise ConfigError(str(path), f"bad numeric row: {exc}") from exc
    if data.shape[0] < 1:
        raise ConfigError(str(path), "no observations")
    return TimeSeriesPair(y=data[:, 0], x=data[:, 1], x_prev0=x0)
