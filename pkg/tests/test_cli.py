import json
import math

import numpy as np
import pytest

from svsmooth import cli
from svsmooth.arithmetic import sparsity_distance


def _read(path):
    return path.read_bytes()


def _run(tmp_path, config, workers=1, seed=None, subdir="out"):
    out = tmp_path / subdir
    code = cli.run(config, workers=workers, out_dir=str(out), seed_override=seed)
    name = config.get("output_path") or config["command"]
    return code, out / f"{name}.csv", out / f"{name}.meta.json"


def test_validate_rejects_unknown_and_missing_keys():
    assert any("unknown key" in d for d in cli.validate(
        {"command": "lcd", "vector": [1.0], "gamma": 0.5, "alpha": 1.0,
         "bogus": 3}))
    assert any("missing" in d for d in cli.validate({"command": "lcd"}))
    assert any("command" in d for d in cli.validate({"command": "fudge"}))
    assert any("command" in d for d in cli.validate({}))
    assert cli.validate({"command": "lcd", "vector": [1.0, 2.0], "gamma": 0.5,
                         "alpha": 1.0}) == []


def test_validate_type_and_range_diagnostics():
    diags = cli.validate({"command": "lcd", "vector": "nope", "gamma": 0.5,
                          "alpha": 1.0})
    assert any("vector" in d and "list of numbers" in d for d in diags)
    diags = cli.validate({"command": "counterexample", "n": 16, "t": 1,
                          "trials": 10, "K": 2.0, "L": 1.0})
    assert any("2*K*sqrt(n)" in d for d in diags)


def test_lcd_command_end_to_end(tmp_path):
    config = {"command": "lcd", "vector": [1.0, 0.0, 0.0], "gamma": 0.5,
              "alpha": 10.0}
    code, csv, meta = _run(tmp_path, config)
    assert code == 0
    lines = csv.read_text().strip().splitlines()
    assert lines[0].split(",")[0] == "status"
    row = dict(zip(lines[0].split(","), lines[1].split(",")))
    assert row["status"] == "found"
    assert float(row["value"]) == pytest.approx(2.0 / 3.0, abs=1e-6)


def test_meta_echo_reruns_byte_identical(tmp_path):
    config = {"command": "tail-sweep", "n": 12,
              "distribution": "lazy_rademacher", "epsilons": [0.05, 0.2, 0.5],
              "trials": 600, "master_seed": 3}
    code, csv, meta = _run(tmp_path, config, subdir="first")
    assert code == 0
    echoed = json.loads(meta.read_text())["config"]
    code2, csv2, _ = _run(tmp_path, echoed, subdir="second")
    assert code2 == 0
    assert _read(csv) == _read(csv2)


def test_workers_do_not_change_csv(tmp_path):
    config = {"command": "tail-sweep", "n": 10, "distribution": "rademacher",
              "epsilons": [0.1, 0.4], "trials": 1500, "master_seed": 8}
    _, csv1, _ = _run(tmp_path, config, workers=1, subdir="w1")
    _, csv3, _ = _run(tmp_path, dict(config), workers=3, subdir="w3")
    assert _read(csv1) == _read(csv3)


def test_computed_constants_echoed_for_rerun(tmp_path):
    config = {"command": "counterexample", "n": 8, "t": 1, "trials": 400,
              "C": [1.0, 4.0], "gate_trials": 300, "master_seed": 21}
    code, csv, meta = _run(tmp_path, config, subdir="a")
    assert code == 0
    echoed = json.loads(meta.read_text())["config"]
    assert isinstance(echoed["K"], float) and isinstance(echoed["L"], float)
    code2, csv2, _ = _run(tmp_path, echoed, subdir="b")
    assert code2 == 0 and _read(csv) == _read(csv2)


def test_budget_truncates_but_exits_clean(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.BUDGET_ENV, "0.05")
    config = {"command": "tail-sweep", "n": 40, "distribution": "gaussian",
              "epsilons": [0.01], "trials": 60_000, "master_seed": 1}
    code, csv, meta = _run(tmp_path, config)
    assert code == 0
    m = json.loads(meta.read_text())
    assert m["truncated"] is True
    assert 0 < m["curve"]["trials_completed"] < 60_000
    assert csv.read_text().count("\n") == 2  # header + one row


def test_budget_env_must_be_numeric(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv(cli.BUDGET_ENV, "soon")
    config = {"command": "lcd", "vector": [1.0, 0.0], "gamma": 0.5,
              "alpha": 1.0}
    code, _, _ = _run(tmp_path, config)
    assert code == 1
    assert cli.BUDGET_ENV in capsys.readouterr().err


def test_failed_check_exits_two(tmp_path):
    # C tiny makes the predicted floor exceed 1, unreachable by any frequency
    config = {"command": "counterexample", "n": 8, "t": 1, "trials": 300,
              "C": 0.001, "K": 1.5, "L": 2 * 1.5 * math.sqrt(8),
              "master_seed": 2}
    code, csv, meta = _run(tmp_path, config)
    assert code == 2
    assert json.loads(meta.read_text())["check_failed"] is True
    assert csv.exists()


def test_config_error_exits_one(tmp_path, capsys):
    code, csv, _ = _run(tmp_path, {"command": "lcd", "vector": [1.0]})
    assert code == 1
    assert "config error" in capsys.readouterr().err
    assert not csv.exists()


def test_runtime_error_exits_one(tmp_path, capsys):
    # valid config whose execution must fail: zero vector cannot be normalized
    config = {"command": "classify", "vector": [0.0, 0.0], "delta": 0.5,
              "rho": 0.5}
    code, _, _ = _run(tmp_path, config)
    assert code == 1
    assert "error" in capsys.readouterr().err


def test_main_reports_unreadable_config(tmp_path, capsys):
    assert cli.main(["--config", str(tmp_path / "missing.json")]) == 1
    assert "cannot read config" in capsys.readouterr().err
    bad = tmp_path / "bad.json"
    bad.write_text("{nope")
    assert cli.main(["--config", str(bad)]) == 1


def test_main_runs_and_honors_seed_flag(tmp_path):
    cfgfile = tmp_path / "c.json"
    cfgfile.write_text(json.dumps({
        "command": "opnorm-quantile", "n": 8, "distribution": "rademacher",
        "q": 0.5, "trials": 300, "master_seed": 0}))
    assert cli.main(["--config", str(cfgfile), "--out", str(tmp_path / "o1")]) == 0
    assert cli.main(["--config", str(cfgfile), "--out", str(tmp_path / "o2"),
                     "--seed", "123"]) == 0
    m1 = json.loads((tmp_path / "o1" / "opnorm-quantile.meta.json").read_text())
    m2 = json.loads((tmp_path / "o2" / "opnorm-quantile.meta.json").read_text())
    assert m1["seed"] == 0 and m2["seed"] == 123
    v1 = (tmp_path / "o1" / "opnorm-quantile.csv").read_text()
    v2 = (tmp_path / "o2" / "opnorm-quantile.csv").read_text()
    assert v1 != v2


def test_csv_floats_round_trip_exactly(tmp_path):
    rng = np.random.default_rng(5)
    x = rng.standard_normal(7)
    x /= np.linalg.norm(x)
    config = {"command": "classify", "vector": x.tolist(), "delta": 0.4,
              "rho": 0.3, "normalize": False}
    code, csv, _ = _run(tmp_path, config)
    assert code == 0
    lines = csv.read_text().strip().splitlines()
    row = dict(zip(lines[0].split(","), lines[1].split(",")))
    assert float(row["sparsity_distance"]) == sparsity_distance(x, 0.4)


def test_every_command_smokes(tmp_path):
    configs = [
        {"command": "tail-sweep", "n": 6, "distribution": "gaussian",
         "epsilons": [0.1], "trials": 200},
        {"command": "lcd", "vector": [2.0, 1.0], "gamma": 0.4, "alpha": 5.0},
        {"command": "classify", "vector": [3.0, 4.0], "delta": 0.5,
         "rho": 0.5},
        {"command": "counterexample", "n": 6, "t": 1, "trials": 200,
         "gate_trials": 200},
        {"command": "event-e", "n": 4, "t": 2, "trials": 400,
         "equality_only": True, "K_gate": 1.5},
        {"command": "lattice", "center": [0.0, 0.0], "widths": [3.0, 3.0]},
        {"command": "cover", "semiaxes": [2.0, 1.0], "audit_samples": 2000},
        {"command": "net", "n": 2, "D": 1.5, "mu": 0.5, "gamma": 0.3,
         "sample_budget": 40},
        {"command": "opnorm-quantile", "n": 6, "distribution": "gaussian",
         "q": 0.9, "trials": 200},
        {"command": "distance-check", "n": 5, "distribution": "gaussian",
         "delta": 0.5, "rho": 0.4, "epsilon": 0.3, "trials": 300},
    ]
    for config in configs:
        code, csv, meta = _run(tmp_path, config, subdir=config["command"])
        assert code in (0, 2), config["command"]
        assert csv.exists() and meta.exists()
        m = json.loads(meta.read_text())
        assert cli.validate(m["config"]) == []
        assert m["versions"]["numpy"] == np.__version__
