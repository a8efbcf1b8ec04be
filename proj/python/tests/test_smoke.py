import json
import math

import numpy as np
import pytest

import tsad


def test_config_defaults():
    cfg = tsad.default_config()
    assert cfg["timeseries.n_steps"] == "16"
    assert "agent.gamma" in cfg
    assert set(cfg) == set(tsad.config_keys())


def test_synthetic_series():
    s = tsad.generate_synthetic(1000, 0.01, 3)
    assert len(s["value"]) == 1000
    assert sum(s["label"]) == 10
    again = tsad.generate_synthetic(1000, 0.01, 3)
    assert again["value"] == s["value"]


def test_kl_and_reward():
    assert tsad.kl_divergence(np.zeros(3), np.zeros(3)) == 0.0
    assert tsad.kl_divergence(np.array([1.0]), np.array([0.0])) == pytest.approx(0.5)
    assert tsad.total_reward(5.0, 0.2, 1.0) == pytest.approx(5.2)


def test_lambda_controller():
    c = tsad.LambdaController(lambda0=1.5, alpha=0.01, r_target=200.0)
    assert c.update(150.0) == pytest.approx(2.0)
    c.set(9.95)
    assert c.update(-1000.0) == 10.0


def test_select_queries():
    assert tsad.select_queries([10, 11, 12], [3.0, 0.1, 1.0], 2) == [11, 12]
    with pytest.raises(tsad.Error, match="budget"):
        tsad.select_queries([1], [0.0], 2)


def test_isolation_scores():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(300, 3))
    x[42] = 20.0
    s = tsad.isolation_scores(x, trees=50, subsample=128, seed=2)
    assert int(np.argmax(s)) == 42


def test_scores():
    s = tsad.scores(tp=8, tn=90, fp=2, fn=0)
    assert s["precision"] == pytest.approx(0.8)
    assert s["recall"] == 1.0
    assert not s["degenerate"]


def test_train_and_evaluate(tmp_path):
    overrides = {
        "data.synthetic_length": 1000,
        "timeseries.n_steps": 8,
        "env.episode_length": 100,
        "agent.episodes": 2,
        "agent.batch_size": 16,
        "agent.hidden": 8,
        "agent.init_mem": 200,
        "agent.forest_trees": 20,
        "vae.epochs": 2,
        "run.out_dir": str(tmp_path),
    }
    report = tsad.train(overrides)
    assert 0.0 <= report["validation"]["f1"] <= 1.0
    assert (tmp_path / "report.json").exists()
    assert json.loads((tmp_path / "report.json").read_text()) == report
    ev = tsad.evaluate(tmp_path / "agent-synthetic-1.ckpt", overrides)
    assert ev["validation"] == report["validation"]
    with pytest.raises(tsad.Error, match="version"):
        tsad.evaluate(tmp_path / "agent-synthetic-1.ckpt", dict(overrides, **{"timeseries.n_steps": 12}))


def test_errors_are_typed(tmp_path):
    with pytest.raises(tsad.Error, match="config"):
        tsad.train({"agent.nope": 1})
    with pytest.raises(tsad.Error, match="argument"):
        tsad.sweep(overrides={"run.out_dir": str(tmp_path)})
