import csv
import json
import math

import numpy as np
import pytest

import mtlprune as mp

TINY = {
    "seed": 3,
    "dataset": {"n_samples": 40, "height": 16, "width": 16},
    "train": {"epochs": 1, "batch_size": 8},
    "prune": {"criterion": "cosprune", "filters_per_step": 4, "stop": {"max_events": 2}},
    "retrain": {"lr_sweep": [1e-3], "epochs": 1},
}


def test_config_errors_name_the_field():
    with pytest.raises(mp.ConfigError, match="dataset.n_samples"):
        mp.config({"dataset": {"n_samples": -1}})
    assert issubclass(mp.ConfigError, mp.Error)


def test_percent_delta_matches_table_arithmetic():
    assert mp.percent_delta(35.83, 41.70) == pytest.approx(16.38, abs=0.01)
    assert mp.percent_delta(0.3896, 0.3276) == pytest.approx(-15.91, abs=0.01)


def test_metrics_from_numpy():
    gt = np.array([[0, 1], [1, 2]], dtype=np.int32)
    seg = mp.seg_metrics(gt, gt, 3)
    assert seg["pixel_acc"] == 1.0 and seg["miou"] == 1.0

    depth = mp.depth_metrics(np.array([1.25, 1.0]), np.array([1.0, 1.0]))
    assert depth["delta_within"][0] == 1.0
    assert depth["rel"] == pytest.approx(0.125)

    up = np.tile([0.0, 0.0, 1.0], (4, 1))
    tilted = np.tile([math.sin(math.radians(20)), 0.0, math.cos(math.radians(20))], (4, 1))
    normals = mp.normal_metrics(tilted, up)
    assert normals["mean_deg"] == pytest.approx(20.0, abs=1e-9)
    assert normals["within"] == [0.0, 1.0, 1.0]
    assert len(mp.metric_columns()) == 12


def test_cosprune_score_bounds_and_scale_invariance():
    rng = np.random.default_rng(0)
    g = [rng.normal(size=27) for _ in range(3)]
    s = mp.score_cosprune([list(v) for v in g])
    assert -3.0 <= s <= 3.0
    scaled = mp.score_cosprune([list(g[0] * 10.0), list(g[1]), list(g[2])])
    assert scaled == pytest.approx(s, abs=1e-12)
    assert mp.score_cosprune([list(g[0])] * 3) == pytest.approx(3.0)


def test_generated_sample_shapes_and_units():
    cfg = mp.config(TINY)
    s = mp.generate_sample(cfg, 0)
    assert s["image"].shape == (3, 16, 16)
    assert s["seg"].shape == (16, 16)
    norms = np.linalg.norm(s["normals"], axis=0)
    assert np.allclose(norms, 1.0, atol=1e-5)
    assert (s["depth"] >= 0.1 - 1e-6).all() and (s["depth"] <= 1.0).all()


def test_pipeline_end_to_end(tmp_path, monkeypatch):
    monkeypatch.setenv("MTLPRUNE_OUTPUT_ROOT", str(tmp_path / "out"))
    cfg = mp.config(TINY)
    assert str(cfg.output_dir) == str(tmp_path / "out")

    train_dir = mp.train(cfg)
    assert (train_dir / "best" / "manifest.json").exists()

    run = mp.prune(cfg)
    with open(run / "curves.csv") as f:
        rows = list(csv.DictReader(f))
    assert len(rows) == 3
    params = [int(r["params"]) for r in rows]
    assert params == sorted(params, reverse=True) and len(set(params)) == 3
    meta = json.loads((run / "run.json").read_text())
    assert meta["criterion"] == "cosprune"

    taylor = mp.prune(cfg, criterion="taylor")
    out = mp.report([run, taylor], tmp_path / "report")
    assert (out / "comparison.csv").exists()

    last = meta["events"][-1]["checkpoint"]
    retrained = mp.retrain(cfg, run / last)
    assert (retrained / "best" / "params.bin").exists()

    evaluated = mp.evaluate(cfg, retrained / "best")
    assert evaluated.suffix == ".json"


def test_selftest_passes():
    ok, log = mp.selftest()
    assert ok, log
