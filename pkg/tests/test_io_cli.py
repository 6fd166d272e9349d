import json

import numpy as np
import pytest

from predboot.cli import main
from predboot.dgp import TimeSeriesPair
from predboot.errors import ConfigError
from predboot.harness import run_experiment
from predboot.io import (config_digest, config_from_dict, make_manifest, parse_config,
                         read_pair_csv, read_report, read_rows_csv, write_pair_csv, write_report)

BASE = {"experiment": "size_power", "R": 12, "seed": 3, "n": [40], "c": [0.0, -5.0]}


def _same_rows(a, b):
    assert len(a) == len(b)
    for r, s in zip(a, b):
        for x, y in zip(r, s):
            if isinstance(x, float) and np.isnan(x):
                assert np.isnan(y)
            else:
                assert x == y


@pytest.mark.parametrize("raw,key", [
    ({"R": 1, "seed": 1}, "experiment"),
    ({**BASE, "bogus": 1}, "bogus"),
    ({**BASE, "gamma_z": 1.5}, "gamma_z"),
    ({**BASE, "n": [100, 2]}, "n[1]"),
    ({**BASE, "R": 2.5}, "R"),
    ({**BASE, "stat": "foo"}, "stat"),
    ({**BASE, "sigma_uv": [0.0, 2.0]}, "sigma_uv[1]"),
    ({**BASE, "scheme": "rbb"}, "b"),
    ({**BASE, "c_z": 1.0}, "c_z"),
    ({**BASE, "studentize": 1}, "studentize"),
])
def test_config_errors_name_the_key(raw, key):
    with pytest.raises(ConfigError) as ei:
        config_from_dict(raw)
    assert ei.value.key == key


def test_parse_config_file_errors(tmp_path):
    p = tmp_path / "c.json"
    p.write_text('{"experiment": "size", "R": 1, "R": 2, "seed": 0}')
    with pytest.raises(ConfigError) as ei:
        parse_config(p)
    assert ei.value.key == "R"
    p.write_text("{not json")
    with pytest.raises(ConfigError):
        parse_config(p)
    with pytest.raises(ConfigError):
        parse_config(tmp_path / "missing.json")
    p.write_text(json.dumps({**BASE, "experiment": "size", "null_beta": None, "c": -5}))
    c = parse_config(p)
    assert c.experiment == "size_power" and c.null_beta is None and c.c == [-5.0]


def test_digest_and_manifest():
    a, b = config_from_dict(BASE), config_from_dict(dict(BASE))
    assert config_digest(a) == config_digest(b)
    assert config_digest(a) != config_digest(config_from_dict({**BASE, "seed": 4}))
    m = make_manifest(a)
    assert "Philox" in m.generator and "started" not in m.hashed_payload()


def test_report_round_trips(tmp_path):
    cfg = config_from_dict({**BASE, "scheme": "wild", "B": 19})
    rep = run_experiment(cfg)
    write_report(rep, tmp_path / "r.csv", "csv")
    _same_rows(read_rows_csv(tmp_path / "r.csv"), rep.rows)
    assert (tmp_path / "r_aggregate.csv").read_text().startswith("cell_id,rejection_rate")
    write_report(rep, tmp_path / "r.json", "json", make_manifest(cfg))
    back = read_report(tmp_path / "r.json")
    _same_rows(back.rows, rep.rows)
    assert back.config == rep.config
    assert [a["rejection_rate"] for a in back.aggregates] == [a["rejection_rate"] for a in rep.aggregates]
    write_report(back, tmp_path / "r2.json", "json", make_manifest(cfg))
    assert (tmp_path / "r2.json").read_bytes() == (tmp_path / "r.json").read_bytes()


def test_pair_csv_round_trip(tmp_path):
    pair = TimeSeriesPair(y=np.array([0.1, -2.5, 3.0]), x=np.array([1.0, 1e-17, -4.0]), x_prev0=0.25)
    write_pair_csv(pair, tmp_path / "p.csv")
    back = read_pair_csv(tmp_path / "p.csv")
    np.testing.assert_array_equal(back.y, pair.y)
    np.testing.assert_array_equal(back.x, pair.x)
    assert back.x_prev0 == 0.25
    (tmp_path / "q.csv").write_text("y,x\n1,2\n3,4\n")
    assert read_pair_csv(tmp_path / "q.csv").x_prev0 == 0.0
    (tmp_path / "bad.csv").write_text("a,b\n1,2\n")
    with pytest.raises(ConfigError):
        read_pair_csv(tmp_path / "bad.csv")


def test_cli_limits(capsys):
    assert main(["limits", "--kind", "dfxi", "--N", "100", "--M", "500", "--seed", "7"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "q,value"
    vals = [float(l.split(",")[1]) for l in lines[1:]]
    assert vals == sorted(vals)


def test_cli_estimate_zero_noise(tmp_path, capsys):
    x = np.cumsum(np.linspace(-1, 1, 50) ** 2 + 0.1)
    y = 0.5 * np.r_[0.0, x[:-1]]
    write_pair_csv(TimeSeriesPair(y=y, x=x), tmp_path / "pair.csv")
    for method in ("ivx", "ols"):
        assert main(["estimate", "--method", method, "--input", str(tmp_path / "pair.csv")]) == 0
        assert float(capsys.readouterr().out) == pytest.approx(0.5, rel=1e-12)


def test_cli_exit_codes(tmp_path, capsys):
    assert main(["frobnicate"]) == 1
    assert "usage" in capsys.readouterr().err
    assert main([]) == 1
    assert main(["estimate", "--input", str(tmp_path / "none.csv")]) == 2
    (tmp_path / "c.json").write_text('{"experiment": "size_power"}')
    assert main(["mc", "--config", str(tmp_path / "c.json")]) == 2
    write_pair_csv(TimeSeriesPair(y=np.ones(5), x=np.zeros(5)), tmp_path / "z.csv")
    assert main(["estimate", "--method", "ols", "--input", str(tmp_path / "z.csv")]) == 3


def test_cli_simulate_boot_test_mc(tmp_path, capsys):
    out = tmp_path / "d.csv"
    assert main(["simulate", "--n", "80", "--c", "-5", "--seed", "2", "--output", str(out)]) == 0
    assert read_pair_csv(out).n == 80
    assert main(["boot-test", "--input", str(out), "--B", "49", "--seed", "1"]) == 0
    res = json.loads(capsys.readouterr().out)
    assert 0 <= res["pvalue"] <= 1 and res["B"] == 49
    (tmp_path / "c.json").write_text(json.dumps(BASE))
    prefix = str(tmp_path / "run")
    assert main(["mc", "--config", str(tmp_path / "c.json"), "--out", prefix]) == 0
    for suffix in (".csv", "_aggregate.csv", ".json", ".timing.json"):
        assert (tmp_path / ("run" + suffix)).exists()
