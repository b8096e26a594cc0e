import csv
import json

import numpy as np
import pytest

from pasql import envs, models
from pasql.cli import main


def _rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_limit_then_eval(tmp_path, capsys):
    assert main(["limit", "--behavior", "mu1", "--out", str(tmp_path)]) == 0
    rows = _rows(tmp_path / "limit.csv")
    assert list(rows[0]) == ["phase", "z", "a", "q", "unvisited"] and len(rows) == 8
    assert main(["eval", "--policy", str(tmp_path / "greedy_policy.json"), "--out", str(tmp_path)]) == 0
    assert float(_rows(tmp_path / "eval.csv")[0]["J"]) == pytest.approx(6.793, abs=1e-3)


def test_search_example1(tmp_path, capsys):
    assert main(["search", "--env", "example1", "--L", "5", "--out", str(tmp_path)]) == 0
    assert float(_rows(tmp_path / "search.csv")[0]["J"]) == pytest.approx(8.810, abs=1e-3)


def test_eval_zero_reward_file(tmp_path, capsys):
    m = envs.env_fig4(0.01)
    zero = models.TabularPomdp(trans=m.trans, reward=np.zeros((6, 2)), gamma=0.9, rho=m.rho)
    models.save_model(zero, tmp_path / "zero.json")
    assert main(["eval", "--env", str(tmp_path / "zero.json"), "--actions", "00", "--out", str(tmp_path)]) == 0
    assert float(_rows(tmp_path / "eval.csv")[0]["J"]) == 0.0


def test_eval_methods(tmp_path, capsys):
    assert main(["eval", "--actions", "1001", "--L", "2", "--method", "mc", "--rollouts", "2000",
                 "--out", str(tmp_path)]) == 0
    assert "stderr" in capsys.readouterr().out
    assert main(["eval", "--env", "example1", "--actions", "00", "--out", str(tmp_path)]) == 0
    assert float(_rows(tmp_path / "eval.csv")[0]["J"]) == pytest.approx(4.0219, abs=1e-3)


def test_usage_errors_exit_2(tmp_path, capsys):
    assert main(["frobnicate"]) == 2
    assert main(["eval", "--out", str(tmp_path)]) == 2  # no policy given
    assert main(["limit", "--env", "example1", "--out", str(tmp_path)]) == 2


def test_computation_errors_exit_1(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"nS": 1}')
    assert main(["limit", "--env", str(bad), "--out", str(tmp_path)]) == 1
    assert "missing field" in capsys.readouterr().err
    assert main(["learn", "--schedule", "poly", "--omega", "0.4", "--steps", "10", "--out", str(tmp_path)]) == 1


def test_chain_and_bound(tmp_path, capsys):
    assert main(["chain", "--behavior", "mu2", "--out", str(tmp_path)]) == 0
    rows = _rows(tmp_path / "chain.csv")
    assert list(rows[0]) == ["phase", "s", "y", "z", "a", "prob"]
    for ell in ("0", "1"):
        assert sum(float(r["prob"]) for r in rows if r["phase"] == ell) == pytest.approx(1.0, abs=1e-10)
    assert main(["bound", "--behavior", "mu1", "--H", "4", "--out", str(tmp_path)]) == 0
    rows = _rows(tmp_path / "bound.csv")
    assert [r["phase"] for r in rows] == ["0", "1"] and float(rows[0]["bound"]) > 0


def test_learn_writes_trace_and_sidecar(tmp_path, capsys):
    assert main(["learn", "--steps", "2000", "--log-every", "1000", "--schedule", "poly",
                 "--seed-list", "3,4", "--out", str(tmp_path)]) == 0
    rows = _rows(tmp_path / "trace_seed3.csv")
    assert list(rows[0]) == ["step", "phase", "z", "a", "q"] and len(rows) == 2 * 8
    meta = json.loads((tmp_path / "trace_seed4.json").read_text())
    assert meta["seed"] == 4 and meta["time_origin"] == 1 and meta["a0"] == 0


def test_convergence_single_snapshot_and_determinism(tmp_path, capsys):
    args = ["convergence", "--behavior", "mu2", "--steps", "5000", "--log-every", "5000", "--schedule", "poly",
            "--seed-list", "7", "--jobs", "1"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    rows = _rows(tmp_path / "a" / "summary.csv")
    assert len(rows) == 8
    lim = {(r["phase"], r["z"], r["a"]): float(r["q"]) for r in _rows(tmp_path / "a" / "limit.csv")}
    for z in "01":
        for a in "01":
            assert abs(lim[("0", z, a)] - lim[("1", z, a)]) <= 1e-9
    for name in ("summary.csv", "limit.csv", "trace_seed7.csv", "convergence.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_convergence_config_file(tmp_path, capsys):
    cfg = {"env": "fig4:p=0.01", "behavior": "mu1", "L": 2, "total_steps": 3000, "log_every": 1000,
           "schedule": {"kind": "poly", "c": 1.0, "omega": 0.85}, "seeds": [1, 2]}
    (tmp_path / "cfg.json").write_text(json.dumps(cfg))
    assert main(["convergence", "--config", str(tmp_path / "cfg.json"), "--jobs", "1",
                 "--out", str(tmp_path / "o")]) == 0
    assert len(_rows(tmp_path / "o" / "summary.csv")) == 3 * 8


def test_repro_two_state(tmp_path, capsys):
    assert main(["repro", "appendixB_zeta", "--out", str(tmp_path)]) == 0
    assert all(r["pass"] == "1" for r in _rows(tmp_path / "repro_appendixB_zeta.csv"))


def test_out_dir_from_environment(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("PASQL_OUT", str(tmp_path / "envout"))
    assert main(["repro", "example2_sweep"]) == 0
    assert (tmp_path / "envout" / "repro_example2_sweep.csv").exists()
