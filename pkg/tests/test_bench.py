import csv
import json
from pathlib import Path

import numpy as np
import pytest

from iwnet import bench
from iwnet.bench import (SUMMARY_COLUMNS, TIMEOUT, ConfigError, DatasetConfig,
                         ExperimentConfig, fit_weights, format_table,
                         rank_and_summarize, run_ablation, run_experiment,
                         run_scaling_study, run_synthetic_study)

ROOT = Path(__file__).resolve().parent.parent


def tiny_cfg(**kw):
    base = dict(
        dataset=DatasetConfig(dim=3, pool_size=300), n=150, repetitions=2,
        seed=3,
        method_params={"iwn": {"max_iters": 50, "patience": 50,
                               "hidden_units": 16},
                       "kmm": {"sigma_grid": [0.1, 1.0]},
                       "kliep": {"sigma_grid": [0.1, 1.0]}})
    base.update(kw)
    return ExperimentConfig(**base)


def test_config_roundtrip(tmp_path):
    cfg = tiny_cfg()
    cfg.dump(tmp_path / "c.json")
    back = ExperimentConfig.load(tmp_path / "c.json")
    assert back == cfg
    back.dump(tmp_path / "d.json")
    assert (tmp_path / "c.json").read_bytes() == (tmp_path / "d.json").read_bytes()


@pytest.mark.parametrize("doc", [
    {"repetitions": 0},
    {"time_budget_seconds": 0},
    {"methods": ["svm"]},
    {"bias": "sideways"},
    {"colour": "red"},
    {"dataset": {"kind": "csv"}},
    {"dataset": {"kind": "csv", "path": "x.csv"}, "bias": "mixture"},
    {"dataset": {"widgets": 3}},
    {"method_params": {"iwn": 3}},
])
def test_config_validation(doc):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(doc)


def test_config_load_errors(tmp_path):
    with pytest.raises(ConfigError):
        ExperimentConfig.load(tmp_path / "missing.json")
    (tmp_path / "bad.json").write_text("{not json")
    with pytest.raises(ConfigError):
        ExperimentConfig.load(tmp_path / "bad.json")


def test_relative_dataset_path_resolves_against_config():
    cfg = ExperimentConfig.load(ROOT / "configs" / "diabetes_output.json")
    assert Path(cfg.dataset.path) == ROOT / "data" / "diabetes.csv"


def test_fit_weights_bad_params():
    x = np.random.default_rng(0).normal(size=(20, 2))
    for method, params in [("iwn", {"nope": 1}), ("iwn", {"batch_size": 1}),
                           ("kmm", {"weight_cap": -1}), ("kliep", {"x": 1}),
                           ("nnw", {"k_grid": []}), ("other", {})]:
        with pytest.raises(ConfigError):
            fit_weights(method, x, x, params)


def _rec(method, rep, ratio, t=1.0):
    if ratio is None:
        return {"method": method, "repetition": rep, "timed_out": True,
                "score_ratio": TIMEOUT, "fit_seconds": t}
    return {"method": method, "repetition": rep, "timed_out": False,
            "score_ratio": ratio, "fit_seconds": t}


def test_rank_and_summary_with_timeouts():
    records = [_rec("iwn", 0, 0.8), _rec("kmm", 0, 0.9), _rec("nnw", 0, None),
               _rec("iwn", 1, 0.7), _rec("kmm", 1, 0.6), _rec("nnw", 1, 0.9)]
    summary = {s["method"]: s for s in
               rank_and_summarize(records, ["iwn", "kmm", "nnw"])}
    assert summary["iwn"]["Avg Rank"] == pytest.approx(1.5)
    assert summary["kmm"]["Avg Rank"] == pytest.approx(1.5)
    # the timed-out run is left out of the rank average
    assert summary["nnw"]["Avg Rank"] == 3.0
    assert summary["nnw"]["Avg Score Ratio"] == 0.9
    assert summary["nnw"]["timeouts"] == 1
    assert "1 timeout" in format_table(list(summary.values()))


def test_rank_ties_average():
    records = [_rec("iwn", 0, 0.8), _rec("kmm", 0, 0.8)]
    summary = rank_and_summarize(records, ["iwn", "kmm"])
    assert [s["Avg Rank"] for s in summary] == [1.5, 1.5]


def test_run_experiment_outputs(tmp_path):
    cfg = tiny_cfg(output_dir=str(tmp_path / "out"))
    records, summary = run_experiment(cfg)
    assert len(records) == 2 * 4
    for r in records:
        assert r["timed_out"] is False
        assert r["w_min"] >= 0 and abs(r["w_mean"] - 1) < 1
    out = tmp_path / "out"
    for name in ("runs.csv", "summary.csv", "summary.txt", "config.json",
                 "traces/iwn_rep0.csv", "traces/iwn_rep1.csv"):
        assert (out / name).exists()
    with open(out / "summary.csv") as f:
        header = next(csv.reader(f))
    assert header == ["method", *SUMMARY_COLUMNS]
    assert list(SUMMARY_COLUMNS) == ["Avg Score Ratio", "Avg Rank",
                                     "Avg Comp. Time"]
    assert json.loads((out / "config.json").read_text())["n"] == 150


def test_run_experiment_timeouts_recorded(tmp_path):
    cfg = tiny_cfg(time_budget_seconds=1e-9, output_dir=str(tmp_path))
    records, summary = run_experiment(cfg)
    assert all(r["timed_out"] and r["score_ratio"] == TIMEOUT for r in records)
    rows = list(csv.DictReader(open(tmp_path / "runs.csv")))
    assert {r["score_ratio"] for r in rows} == {TIMEOUT}
    assert all(s["timeouts"] == 2 for s in summary)


def test_runs_csv_deterministic(tmp_path):
    def strip(path):
        rows = list(csv.reader(open(path)))
        j = rows[0].index("fit_seconds")
        return [r[:j] + r[j + 1:] for r in rows]

    run_experiment(tiny_cfg(output_dir=str(tmp_path / "a")))
    run_experiment(tiny_cfg(output_dir=str(tmp_path / "b")))
    assert strip(tmp_path / "a" / "runs.csv") == strip(tmp_path / "b" / "runs.csv")


def test_parallel_matches_serial(tmp_path):
    recs1, _ = run_experiment(tiny_cfg(methods=["nnw", "iwn"]), workers=1)
    recs2, _ = run_experiment(tiny_cfg(methods=["nnw", "iwn"]), workers=2)
    for a, b in zip(recs1, recs2):
        assert a["score_ratio"] == b["score_ratio"]


def test_workers_env(monkeypatch):
    monkeypatch.setenv(bench.WORKERS_ENV, "3")
    assert bench.default_workers() == 3
    monkeypatch.setenv(bench.WORKERS_ENV, "many")
    with pytest.raises(ConfigError):
        bench.default_workers()


def test_csv_dataset_experiment(tmp_path):
    cfg = ExperimentConfig(
        dataset=DatasetConfig(kind="csv", path=str(ROOT / "data" / "diabetes.csv"),
                              target_columns=["target"],
                              categorical_columns=["sex"]),
        bias="input", n=120, repetitions=1, methods=["nnw", "kmm"],
        method_params={"kmm": {"sigma_grid": [0.1]}})
    records, _ = run_experiment(cfg)
    assert all(np.isfinite(r["score_ratio"]) for r in records)


def test_multi_output_csv_experiment():
    cfg = ExperimentConfig(
        dataset=DatasetConfig(kind="csv", path=str(ROOT / "data" / "linnerud.csv"),
                              target_columns=["Weight", "Waist", "Pulse"]),
        bias="output", n=30, repetitions=1, methods=["nnw"])
    records, _ = run_experiment(cfg)
    assert np.isfinite(records[0]["score_ratio"])


@pytest.mark.slow
def test_null_bias_iwn_is_harmless():
    cfg = ExperimentConfig(dataset=DatasetConfig(dim=4, pool_size=1000),
                           bias="none", n=500, repetitions=3, methods=["iwn"],
                           method_params={"iwn": {"max_iters": 1000,
                                                  "patience": 1000}})
    _, summary = run_experiment(cfg)
    assert 0.9 <= summary[0]["Avg Score Ratio"] <= 1.1


def test_synthetic_study_small(tmp_path):
    res = run_synthetic_study(dim=2, n=300, iterations=100, eval_every=50,
                              num_components=4, with_kmm=False,
                              iwn_params={"hidden_units": 16},
                              output_dir=tmp_path)
    assert res["sigma_start"] == 0.1
    assert sorted(res["mae_trace"]) == [50, 100]
    assert res["full_mmd_start"] is not None
    rows = list(csv.reader(open(tmp_path / "synthetic_trace.csv")))
    assert rows[0] == ["iteration", "series", "value"]
    assert {r[1] for r in rows[1:]} >= {"batch_mmd", "sigma", "full_mmd",
                                         "mae_iwn", "mae_uniform"}


def test_scaling_small(tmp_path):
    rows = run_scaling_study([50, 100], [2], ["nnw", "iwn"], iwn_iters=5,
                             output_dir=tmp_path)
    assert [(r["method"], r["n"]) for r in rows] == [
        ("nnw", 50), ("iwn", 50), ("nnw", 100), ("iwn", 100)]
    assert (tmp_path / "scaling.csv").exists()
    rows = run_scaling_study([50], [2], ["kmm"], budget=1e-9)
    assert rows[0]["timed_out"]


def test_ablation_small(tmp_path):
    rows = run_ablation([(0, 10), (1, 8)], [16], DatasetConfig(dim=2, pool_size=200),
                        n=100, repetitions=2, iterations=20,
                        output_dir=tmp_path)
    kinds = [r["kind"] for r in rows]
    assert kinds == ["architecture", "architecture", "batch"]
    assert all(len(r["scores"]) == 2 for r in rows)
    assert (tmp_path / "ablation.csv").exists()
    assert "size" in bench.format_ablation(rows)
