import csv
import io
import json
import math

import pytest

from conftest import FIGURES
from fairbid.cli import main
from fairbid.config import Config
from fairbid.datalog import parse_bid_log

SIMULATE_CONFIGS = sorted(
    p.name for p in FIGURES.glob("*.toml") if "grid" in Config.load(p).data and "experiment" in Config.load(p).data
)
QUICK = ["--set", "run.runs=2", "--set", "run.T=150", "--set", "solver.epsilon=1e-2"]


def _first_values(name):
    cfg = Config.load(FIGURES / name)
    out = []
    for key, values in cfg.section("grid").items():
        out += ["--set", f"grid.{key}=[{values[0]!r}]"]
    return out


def _rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_figure_configs_exist():
    assert len(SIMULATE_CONFIGS) >= 12


@pytest.mark.parametrize("name", SIMULATE_CONFIGS)
def test_every_figure_config_runs(name, tmp_path):
    out = tmp_path / "out.csv"
    code = main(["simulate", "--config", str(FIGURES / name), "--out", str(out), *QUICK, *_first_values(name)])
    assert code == 0
    rows = _rows(out)
    assert rows, name
    for row in rows:
        assert math.isfinite(float(row["revenue_ratio"]))


def test_simulation_output_is_reproducible(tmp_path):
    cfg = str(FIGURES / "synthetic_kcompare.toml")
    args = [*QUICK, "--set", "grid.p=[0.3, 0.5, 0.7]", "--set", "grid.K=[2]"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["simulate", "--config", cfg, "--out", str(a), *args]) == 0
    assert main(["simulate", "--config", cfg, "--out", str(b), "--threads", "3", *args]) == 0
    assert a.read_bytes() == b.read_bytes()
    c = tmp_path / "c.csv"
    assert main(["simulate", "--config", cfg, "--out", str(c), "--seed", "7", *args]) == 0
    assert c.read_bytes() != a.read_bytes()


def test_solve_writes_table_and_manifest(tmp_path):
    out = tmp_path / "t.csv"
    assert main(["solve", "--config", str(FIGURES / "solve_parity.toml"), "--out", str(out)]) == 0
    manifest = json.loads((tmp_path / "t.csv.manifest.json").read_text())
    assert manifest["iterations"] == len(manifest["delta_trace"])
    assert manifest["converged_delta"] < manifest["epsilon"]
    assert manifest["wall_seconds"] < 120


def test_validate_accepts_solved_table(tmp_path, capsys):
    cfg = str(FIGURES / "solve_parity.toml")
    table = tmp_path / "t.csv"
    overrides = ["--set", "solver.epsilon=1e-7", "--set", "market.delta=0.99"]
    assert main(["solve", "--config", cfg, "--out", str(table), *overrides]) == 0
    assert main(["validate", "--config", cfg, "--table", str(table), *overrides]) == 0
    assert "0 failures" in capsys.readouterr().out


def test_validate_accepts_myopic_table(tmp_path):
    cfg = str(FIGURES / "solve_ratio.toml")
    table = tmp_path / "t.csv"
    overrides = ["--set", "market.delta=0", "--set", "constraint.mu=6", "--set", "validate.tolerance_steps=1"]
    assert main(["solve", "--config", cfg, "--out", str(table), *overrides]) == 0
    assert main(["validate", "--config", cfg, "--table", str(table), *overrides]) == 0


def test_validate_rejects_corrupted_table(tmp_path):
    cfg = str(FIGURES / "solve_parity.toml")
    table = tmp_path / "t.csv"
    assert main(["solve", "--config", cfg, "--out", str(table), "--set", "market.delta=0.9"]) == 0
    lines = table.read_text().splitlines()
    for i, line in enumerate(lines):
        if line.startswith("0,w,"):
            k, theta, v, _ = line.split(",")
            lines[i] = f"{k},{theta},{v},0.5"
    table.write_text("\n".join(lines) + "\n")
    assert main(["validate", "--config", cfg, "--table", str(table), "--set", "market.delta=0.9"]) == 4


def test_config_error_exit(tmp_path, capsys):
    code = main(["solve", "--config", str(FIGURES / "solve_ratio.toml"), "--out", str(tmp_path / "t.csv"), "--set", "market.p=1.0"])
    assert code == 2
    assert "config error" in capsys.readouterr().err


def test_missing_config_exit():
    assert main(["simulate", "--config", "does-not-exist.toml"]) == 2


def test_non_convergence_exit(tmp_path, capsys):
    code = main(
        [
            "solve",
            "--config",
            str(FIGURES / "solve_parity.toml"),
            "--out",
            str(tmp_path / "t.csv"),
            "--set",
            "solver.epsilon=1e-12",
            "--set",
            "solver.max_iterations=4",
        ]
    )
    assert code == 3
    assert "delta trace" in capsys.readouterr().err


def test_genlog_round_trips(tmp_path):
    out = tmp_path / "log.csv"
    assert main(["genlog", "--config", str(FIGURES / "genlog_yahoo_like.toml"), "--out", str(out), "--set", "genlog.buckets=3"]) == 0
    log = parse_bid_log(out.read_bytes())
    assert len(log) == 75 and not log.errors


def test_genlog_empty(tmp_path):
    out = tmp_path / "log.csv"
    assert main(["genlog", "--config", str(FIGURES / "genlog_yahoo_like.toml"), "--out", str(out), "--set", "genlog.records_per_bucket=0"]) == 0
    assert out.read_text() == "bucket,advertiser_id,keyword_id,bid\n"


def test_shipped_log_matches_generator(tmp_path):
    out = tmp_path / "log.csv"
    assert main(["genlog", "--config", str(FIGURES / "genlog_yahoo_like.toml"), "--out", str(out)]) == 0
    assert out.read_bytes() == (FIGURES / "data" / "yahoo_like.csv").read_bytes()


def test_stationarity_command(tmp_path):
    out = tmp_path / "ks.csv"
    assert main(["stationarity", "--config", str(FIGURES / "stationarity.toml"), "--out", str(out)]) == 0
    (row,) = _rows(out)
    assert 0 <= float(row["ks_statistic"]) < 0.05


def test_stdout_output(capsys):
    assert main(["stationarity", "--config", str(FIGURES / "stationarity.toml"), "--out", "-"]) == 0
    assert list(csv.reader(io.StringIO(capsys.readouterr().out)))[0][0] == "keyword"
