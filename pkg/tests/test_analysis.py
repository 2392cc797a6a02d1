import csv
import json

import numpy as np
import pytest

from rotorvib.analysis import (
    aggregate_importance,
    best_by_family,
    emit_report,
    load_report,
    pca_component_sweep,
    run_feature_isolation,
    run_importance,
    run_pca_scenarios,
    scenario_accuracies,
    majority_accuracy,
    SweepResult,
    ScenarioResult,
)
from rotorvib.exceptions import NotTreeBased, PcaModelRejected, SchemaMismatch
from rotorvib.features import Family, build_schema
from rotorvib.models import make_model
from rotorvib.pipeline import Dataset, Preprocessor, stratified_split

SCHEMA = build_schema(2, 3, 1)  # 14 columns per axis, 84 in all


def toy_dataset(rng, n=90, informative="central_x_stft_t00_f001"):
    X = rng.normal(size=(n, len(SCHEMA)))
    y = np.array([0] * (n // 3) + [1] * (n - n // 3))
    X[:, SCHEMA.index_of(informative)] += 4.0 * y
    return Dataset(X, y, np.array(["e"] * n, dtype=object), SCHEMA)


def test_pca_scenario_shapes(rng):
    ds = toy_dataset(rng)
    results = run_pca_scenarios(ds, algorithms=("dt", "knn"), ks=(2, 3), seed=0)
    ids = [r.id for r in results]
    assert ids == ["NoPca", "StftPca(2)", "StftPca(3)", "AllPca(2)", "AllPca(3)"]
    by_id = {r.id: r for r in results}
    assert by_id["NoPca"].n_features == len(SCHEMA)
    assert by_id["AllPca(3)"].n_features == 3
    n_stft = len(SCHEMA.indices(Family.STFT))
    assert by_id["StftPca(2)"].n_features == len(SCHEMA) - n_stft + 2
    for r in results:
        assert set(r.accuracies) == {"dt", "knn"}
        assert all(0.0 <= a <= 1.0 for a in r.accuracies.values())


def test_scenarios_share_one_split(rng):
    ds = toy_dataset(rng)
    results = run_pca_scenarios(ds, algorithms=("dt",), ks=(2,), seed=4)
    splits = {json.dumps(r.config["split"], sort_keys=True) for r in results}
    assert len(splits) == 1
    iso = run_feature_isolation(ds, ks=(2,), seed=4, algorithms=("dt",))
    assert {json.dumps(r.config["split"], sort_keys=True) for r in iso} == splits


def test_sweep_size_and_tie_break(rng):
    ds = toy_dataset(rng, n=120)
    sweep = pca_component_sweep(ds, "knn", range(2, 31), seed=0, family="STFT")
    assert len(sweep.results) == 29
    assert sorted(sweep.accuracies) == list(range(2, 31))
    top = max(sweep.accuracies.values())
    assert sweep.best_k == min(k for k, a in sweep.accuracies.items() if a == top)


def test_best_k_smallest_among_ties():
    rs = [ScenarioResult("StftPca", k, "STFT", 0, {"dt": a}) for k, a in ((2, 0.9), (3, 1.0), (4, 1.0), (5, 0.8))]
    sweep = SweepResult(rs, "dt", "STFT")
    assert sweep.best_k == 3 and sweep.interior
    flat = SweepResult([ScenarioResult("StftPca", k, "STFT", 0, {"dt": 1.0}) for k in (2, 3, 4)], "dt", "STFT")
    assert flat.best_k == 2 and not flat.interior


def test_isolation_caps_k(rng):
    ds = toy_dataset(rng)
    results = run_feature_isolation(ds, ks=(10, 15, 20), seed=0, algorithms=("dt",))
    by_family = {}
    for r in results:
        by_family.setdefault(r.family, []).append(r)
    # wavelet has 2 columns per axis (12), time domain 24, STFT 36
    assert [r.k for r in by_family["Wavelet"]] == [None, 10, 12]
    assert [r.k for r in by_family["TimeDomain"]] == [None, 10, 15, 20]
    assert by_family["Wavelet"][0].n_features == 12
    assert by_family["Wavelet"][-1].id == "Isolation(Wavelet,12)"
    best = best_by_family(results)
    assert set(best) == {"STFT", "Wavelet", "TimeDomain"}
    assert best["STFT"] == max(r.best for r in by_family["STFT"])


def test_single_informative_feature_owns_importance(rng):
    ds = toy_dataset(rng)
    X = np.zeros_like(ds.X)
    X[:, SCHEMA.index_of("outer_y_wpt01")] = ds.y
    tree = make_model("dt").fit(X, ds.y)
    agg = aggregate_importance(tree, SCHEMA, top_k=10)
    assert agg.top[0] == ("outer_y_wpt01", 1.0)
    assert agg.family_importance_all["Wavelet"] == pytest.approx(1.0)
    assert agg.axis_importance_all["Y"] == pytest.approx(1.0)
    assert sum(agg.family_counts.values()) == 10
    assert sum(agg.axis_counts.values()) == 10


def test_importance_breakdowns_normalized(rng):
    ds = toy_dataset(rng)
    forest = make_model("rf", n_estimators=20, random_state=0).fit(ds.X, ds.y)
    agg = aggregate_importance(forest, SCHEMA)
    assert list(agg.family_counts) == ["STFT", "FS", "SC", "Wavelet", "TimeDomain"]
    assert sum(agg.family_counts.values()) == 10
    assert abs(sum(agg.axis_importance_all.values()) - 1.0) < 1e-9
    assert abs(sum(agg.family_importance_all.values()) - 1.0) < 1e-9
    assert agg.top[0][0] == "central_x_stft_t00_f001"
    values = [v for _, v in agg.top]
    assert values == sorted(values, reverse=True)


def test_importance_rejections(rng):
    ds = toy_dataset(rng)
    with pytest.raises(NotTreeBased):
        aggregate_importance(make_model("knn").fit(ds.X, ds.y), SCHEMA)
    split = stratified_split(ds, 0.7, 0)
    pre = Preprocessor(5).fit(ds, split)
    Xtr, ytr, _, _ = pre.train_test(ds)
    with pytest.raises(PcaModelRejected):
        aggregate_importance(make_model("dt").fit(Xtr, ytr), pre.schema_out_)
    with pytest.raises(SchemaMismatch):
        aggregate_importance(make_model("dt").fit(ds.X[:, :5], ds.y), SCHEMA)


def test_run_importance(rng):
    ds = toy_dataset(rng)
    out = run_importance(ds, ("dt", "rf"), top_k=5, seed=0, model_params={"rf": {"n_estimators": 15}})
    assert set(out) == {"dt", "rf"}
    for agg in out.values():
        assert len(agg["top"]) == 5 and 0 <= agg["accuracy"] <= 1
        assert agg["top"][0]["name"] == "central_x_stft_t00_f001"


def test_report_round_trip_reproduces(rng, tmp_path):
    ds = toy_dataset(rng)
    results = run_pca_scenarios(ds, algorithms=("dt", "rf"), ks=(2, 4), seed=7,
                                model_params={"rf": {"n_estimators": 10}})
    config = {"seed": 7, "ks": [2, 4], "algorithms": ["dt", "rf"], "model_params": {"rf": {"n_estimators": 10}}}
    path = emit_report(results, tmp_path / "r.json", "json", "pca-scenarios", config)
    doc = load_report(path)
    assert list(doc) == ["study", "config", "scenarios", "importance"]
    assert list(doc["scenarios"][0]) == ["id", "algorithm", "accuracy", "k", "family", "seed",
                                         "n_features", "duration_ms"]
    cfg = doc["config"]
    rerun = run_pca_scenarios(ds, algorithms=cfg["algorithms"], ks=cfg["ks"], seed=cfg["seed"],
                              model_params=cfg["model_params"])
    assert scenario_accuracies([row for r in rerun for row in r.rows()]) == scenario_accuracies(doc["scenarios"])

    emit_report(results, tmp_path / "r.csv", "csv", "pca-scenarios", config)
    with open(tmp_path / "r.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 10 and rows[0]["study"] == "pca-scenarios"
    assert {(r["id"], r["algorithm"]): float(r["accuracy"]) for r in rows} == scenario_accuracies(doc["scenarios"])
    with pytest.raises(ValueError):
        emit_report(results, tmp_path / "r.xml", "xml")


def test_majority_accuracy():
    assert majority_accuracy([0] * 480 + [1] * 1080) == pytest.approx(1080 / 1560)
