import csv
import json
from pathlib import Path

import numpy as np
import pytest

from minimaxq import matching_pennies, save_game
from minimaxq import cli as cli_module
from minimaxq.cli import cli
from minimaxq.comparison import run_coupled
from minimaxq.errors import ParameterError
from minimaxq.experiment import CSV_COLUMNS, ExperimentConfig, certify, metadata_path, run_experiment, write_csv

DATA = Path(__file__).parent / "data"
GOLDEN_ARGS = ["--alpha", "0.1", "--steps", "20", "--trials", "2", "--seed", "3"]


@pytest.fixture
def mp2_file(tmp_path):
    path = tmp_path / "mp2.json"
    save_game(matching_pennies(0.5), path)
    return path


def read_csv(path):
    with open(path) as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float)


def test_solve_prints_solution(mp2_file, capsys):
    assert cli(["solve", "--game", str(mp2_file), "--tol", "1e-12"]) == 0
    out = capsys.readouterr().out
    line = next(l for l in out.splitlines() if l.startswith("Q* ="))
    q = np.array(json.loads(line.split("=", 1)[1]))
    np.testing.assert_allclose(q, [0, -2, -2, 0], atol=1e-10)
    assert "pi* = [0]" in out and "mu* = [[1, 0]]" in out and "iterations =" in out


def test_verify_writes_csv_and_metadata(mp2_file, tmp_path, capsys):
    out = tmp_path / "run.csv"
    code = cli(["verify", "--game", str(mp2_file), "--alpha", "0.05", "--steps", "2000", "--trials", "10", "--seed", "7", "--out", str(out)])
    assert code == 0
    header, rows = read_csv(out)
    assert tuple(header) == CSV_COLUMNS
    assert rows.shape == (2001, len(CSV_COLUMNS))
    np.testing.assert_array_equal(rows[:, 0], np.arange(2001))
    assert np.all(rows[:, -1] == 0)
    meta = json.loads(metadata_path(out).read_text())
    assert meta["rng"].startswith("numpy.random.Generator")
    assert meta["bound_exponent_variant"] == "printed"
    assert len(meta["trial_seeds"]) == 10 and meta["config"]["base_seed"] == 7
    assert meta["violations"] == []


def test_csv_numbers_have_full_precision(mp2_file, tmp_path):
    out = tmp_path / "run.csv"
    cli(["verify", "--game", str(mp2_file), *GOLDEN_ARGS, "--out", str(out)])
    text = out.read_text().splitlines()[5].split(",")
    digits = [len(x.replace("-", "").replace(".", "").split("e")[0].lstrip("0")) for x in text[1:-1]]
    assert min(digits) >= 12


def test_csv_matches_golden(mp2_file, tmp_path):
    out = tmp_path / "run.csv"
    assert cli(["verify", "--game", str(mp2_file), *GOLDEN_ARGS, "--out", str(out)]) == 0
    header, rows = read_csv(out)
    golden_header, golden = read_csv(DATA / "golden_mp2_verify.csv")
    assert header == golden_header
    np.testing.assert_allclose(rows, golden, rtol=1e-12, atol=1e-15)


def test_verify_bitwise_reproducible(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["verify", "--dims", "2", "2", "3", "--gen-seed", "4", "--gamma", "0.8", "--steps", "500", "--trials", "5"]
    assert cli([*args, "--out", str(a)]) == 0
    assert cli([*args, "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert metadata_path(a).read_text().replace("a.csv", "b.csv") == metadata_path(b).read_text()


@pytest.mark.parametrize(
    "argv",
    [
        ["verify", "--dims", "2", "2", "1", "--alpha", "1.5"],
        ["verify", "--dims", "2", "2", "1", "--alpha", "0"],
        ["verify"],
        ["verify", "--dims", "2", "2", "1", "--gamma", "1.2"],
        ["frobnicate"],
        ["solve"],
        ["solve", "--game", "/nonexistent/game.json"],
        ["learn", "--game", "MISSING", "--alpha", "2"],
    ],
)
def test_usage_errors_exit_2(argv, capsys):
    assert cli(argv) == 2


def test_bad_game_file_exit_2(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"num_states": 1}')
    assert cli(["solve", "--game", str(path)]) == 2


def test_violation_exits_1(mp2_file, tmp_path, monkeypatch, capsys):
    real = cli_module.run_experiment

    def broken(cfg):
        record = real(cfg)
        record.violations = ["order_violation k=3 count=1"]
        return record

    monkeypatch.setattr(cli_module, "run_experiment", broken)
    assert cli(["verify", "--game", str(mp2_file), *GOLDEN_ARGS, "--out", str(tmp_path / "x.csv")]) == 1
    assert "VIOLATION: order_violation k=3" in capsys.readouterr().err


def test_certify_names_each_problem():
    cfg = ExperimentConfig(gen_dims=(2, 2, 1), gamma=0.5, steps=30, trials=2, alpha=0.1)
    record = run_experiment(cfg)
    assert certify(record.stats, record.bounds) == []
    stats = record.stats
    stats.order_violations[4] = 2
    stats.max_lower_identity_residual = 1e-9
    bounds = dict(record.bounds)
    bounds["thm4"] = np.zeros_like(bounds["thm4"])
    problems = certify(stats, bounds)
    assert any(p.startswith("order_violation k=4 count=2") for p in problems)
    assert any(p.startswith("lower_identity_residual") for p in problems)
    assert any(p.startswith("bound_violation thm4 vs err_U_inf") for p in problems)


def test_learn_and_bounds_and_generate(mp2_file, tmp_path, capsys, monkeypatch):
    snaps = tmp_path / "learn.csv"
    assert cli(["learn", "--game", str(mp2_file), "--steps", "300", "--out", str(snaps)]) == 0
    header, rows = read_csv(snaps)
    assert header[0] == "k" and rows.shape == (301, 5)
    assert cli(["bounds", "--game", str(mp2_file), "--alpha", "0.1", "--points", "3", "--k-max", "100"]) == 0
    out = capsys.readouterr().out
    assert "rho = 0.9875" in out
    monkeypatch.setenv("MINIMAXQ_OUT_DIR", str(tmp_path))
    assert cli(["generate", "--dims", "2", "2", "3", "--gamma", "0.8", "--seed", "1", "--random-sampling"]) == 0
    assert cli(["solve", "--game", str(tmp_path / "game.json")]) == 0
    assert cli(["generate", "--preset", "mp2", "--out", str(tmp_path / "p.json")]) == 0
    assert json.loads((tmp_path / "p.json").read_text())["reward"] == [[[1.0], [-1.0]], [[-1.0], [1.0]]]


def test_run_experiment_single_trial_is_trajectory():
    cfg = ExperimentConfig(gen_dims=(2, 2, 3), gen_seed=2, gamma=0.8, steps=200, trials=1, base_seed=5, alpha=0.2)
    record = run_experiment(cfg)
    from minimaxq.experiment import resolve_game
    from minimaxq.learning import trial_seed

    spec, model = resolve_game(cfg)
    traj = run_coupled(spec, model, 0.2, 200, trial_seed(5, 0), np.zeros(spec.n), record.q_star)
    np.testing.assert_array_equal(record.stats.mean_inf["L"], traj.err_inf[:, 1])
    np.testing.assert_array_equal(record.stats.mean_2["LU"], traj.err_2[:, 3])


def test_run_experiment_mp2_default_no_violations(mp2_file):
    record = run_experiment(ExperimentConfig(game_path=str(mp2_file), steps=3000, trials=20))
    assert record.ok
    assert np.all(record.stats.order_violations == 0)


def test_config_validation():
    with pytest.raises(ParameterError):
        ExperimentConfig(gen_dims=(1, 1, 1), alpha=1.0).validate()
    with pytest.raises(ParameterError):
        ExperimentConfig(gen_dims=(1, 1, 1), trials=0).validate()
    with pytest.raises(ParameterError):
        ExperimentConfig().validate()
    a = ExperimentConfig(gen_dims=(1, 1, 1))
    assert a.digest() == ExperimentConfig(gen_dims=(1, 1, 1), out="elsewhere").digest()
    assert a.digest() != ExperimentConfig(gen_dims=(1, 1, 1), alpha=0.2).digest()


def test_write_csv_direct(tmp_path):
    record = run_experiment(ExperimentConfig(gen_dims=(1, 2, 2), gamma=0.3, steps=5, trials=3))
    write_csv(record, tmp_path / "r.csv")
    header, rows = read_csv(tmp_path / "r.csv")
    assert rows.shape == (6, 14)
    np.testing.assert_allclose(rows[:, header.index("bound_thm5")], record.bounds["thm5"], rtol=1e-16)
