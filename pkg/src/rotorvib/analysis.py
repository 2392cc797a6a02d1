"""The three result studies: PCA scenarios (plus a component sweep),
feature-family isolation, and Gini importance aggregation.

Every scenario of one study shares the same split and the same fitted
scaler; only the transform and the algorithm vary.
"""
from __future__ import annotations

import csv
import json
import time
from collections import Counter
from dataclasses import asdict, dataclass, field

import numpy as np

from .exceptions import NotTreeBased, PcaModelRejected, SchemaMismatch
from .features.schema import AXES, Family
from .models import accuracy, make_model
from .models.tree import DecisionTree, RandomForest, gini_importance
from .pipeline import MaskedPCA, Preprocessor, family_mask, select_family, stratified_split

ALGORITHMS = ("svm", "dt", "rf", "knn")
ISOLATION_FAMILIES = (Family.STFT, Family.WAVELET, Family.TIME_DOMAIN)
IMPORTANCE_FAMILIES = ("STFT", "FS", "SC", "Wavelet", "TimeDomain")


@dataclass
class ScenarioResult:
    scenario: str  # NoPca | StftPca | AllPca | Isolation
    k: int | None
    family: str | None
    seed: int
    accuracies: dict = field(default_factory=dict)
    durations_ms: dict = field(default_factory=dict)
    n_features: int = 0
    config: dict = field(default_factory=dict)

    @property
    def id(self):
        if self.scenario == "Isolation":
            return f"Isolation({self.family})" if self.k is None else f"Isolation({self.family},{self.k})"
        return self.scenario if self.k is None else f"{self.scenario}({self.k})"

    def rows(self):
        for alg, acc in self.accuracies.items():
            yield {
                "id": self.id,
                "algorithm": alg,
                "accuracy": acc,
                "k": self.k,
                "family": self.family,
                "seed": self.seed,
                "n_features": self.n_features,
                "duration_ms": self.durations_ms.get(alg),
            }

    @property
    def best(self):
        return max(self.accuracies.values())


def _model_params(algorithm, seed, model_params):
    params = dict((model_params or {}).get(algorithm, {}))
    if algorithm == "rf":
        params.setdefault("random_state", seed)
    return params


def evaluate(Xtr, ytr, Xte, yte, algorithms, seed=0, model_params=None):
    """Train each algorithm, return ``(accuracies, durations_ms)``."""
    accs, times = {}, {}
    for alg in algorithms:
        t0 = time.perf_counter()
        model = make_model(alg, **_model_params(alg, seed, model_params)).fit(Xtr, ytr)
        accs[alg] = accuracy(model.predict(Xte), yte)
        times[alg] = round((time.perf_counter() - t0) * 1000.0, 1)
    return accs, times


def _split(dataset, seed, split, train_fraction=0.7):
    return split if split is not None else stratified_split(dataset, train_fraction, seed)


def _run(pre, dataset, scenario, k, family, algorithms, seed, model_params):
    Xtr, ytr, Xte, yte = pre.train_test(dataset)
    accs, times = evaluate(Xtr, ytr, Xte, yte, algorithms, seed, model_params)
    return ScenarioResult(
        scenario, k, family, seed, accs, times, Xtr.shape[1],
        {"split": pre.split_.to_dict(), "model_params": model_params or {}},
    )


def _fit_pca_basis(pre, dataset, family, k_max):
    """One eigendecomposition per mask; callers truncate with ``with_components``."""
    mask = family_mask(dataset.schema, family)
    train = pre.scaler_.transform(dataset.X[pre.split_.train])
    return MaskedPCA(k_max, mask).fit(train)


def run_pca_scenarios(dataset, algorithms=ALGORITHMS, ks=(10, 15, 20), seed=0, split=None,
                      model_params=None):
    """No PCA, PCA on the STFT columns only, PCA on every column."""
    split = _split(dataset, seed, split)
    pre = Preprocessor().fit(dataset, split)
    results = [_run(pre, dataset, "NoPca", None, None, algorithms, seed, model_params)]
    for scenario, family in (("StftPca", Family.STFT), ("AllPca", None)):
        basis = _fit_pca_basis(pre, dataset, family, max(ks))
        for k in ks:
            results.append(
                _run(pre.with_pca(basis.with_components(k)), dataset, scenario, k,
                     None if family is None else family.value, algorithms, seed, model_params)
            )
    return results


@dataclass
class SweepResult:
    results: list
    algorithm: str
    family: str | None

    @property
    def accuracies(self):
        return {r.k: r.accuracies[self.algorithm] for r in self.results}

    @property
    def best_k(self):
        """Smallest k among those with the highest accuracy."""
        accs = self.accuracies
        top = max(accs.values())
        return min(k for k, a in accs.items() if a == top)

    @property
    def interior(self):
        ks = sorted(self.accuracies)
        return ks[0] < self.best_k < ks[-1]


def pca_component_sweep(dataset, algorithm="dt", k_range=range(2, 31), seed=0, family="STFT",
                        split=None, model_params=None):
    """Accuracy of one algorithm for each number of PCA components."""
    k_range = list(k_range)
    split = _split(dataset, seed, split)
    pre = Preprocessor().fit(dataset, split)
    fam = None if family in (None, "all") else Family.parse(family)
    basis = _fit_pca_basis(pre, dataset, fam, max(k_range))
    results = [
        _run(pre.with_pca(basis.with_components(k)), dataset, "StftPca" if fam is Family.STFT else
             ("AllPca" if fam is None else f"{fam.value}Pca"), k, None if fam is None else fam.value,
             (algorithm,), seed, model_params)
        for k in k_range
    ]
    return SweepResult(results, algorithm, None if fam is None else fam.value)


def run_feature_isolation(dataset, families=ISOLATION_FAMILIES, ks=(10, 15, 20), seed=0,
                          algorithms=ALGORITHMS, split=None, model_params=None):
    """Each family alone, without PCA and with PCA(k) for every usable k.

    ``k`` is capped at the family's column count; duplicates after capping
    are dropped.
    """
    split = _split(dataset, seed, split)
    results = []
    for family in families:
        family = Family.parse(family)
        sub = select_family(dataset, family)
        pre = Preprocessor().fit(sub, split)
        results.append(_run(pre, sub, "Isolation", None, family.value, algorithms, seed, model_params))
        limit = min(sub.X.shape[1], split.train.size - 1)
        usable = sorted({min(k, limit) for k in ks or ()})
        if not usable:
            continue
        basis = _fit_pca_basis(pre, sub, None, max(usable))
        for k in usable:
            results.append(
                _run(pre.with_pca(basis.with_components(k)), sub, "Isolation", k, family.value,
                     algorithms, seed, model_params)
            )
    return results


def best_by_family(results):
    """Highest accuracy over all algorithms and k, per isolated family."""
    best = {}
    for r in results:
        if r.scenario == "Isolation":
            best[r.family] = max(best.get(r.family, 0.0), r.best)
    return best


@dataclass
class ImportanceAggregate:
    top: list  # [(name, importance)], most important first
    family_counts: dict
    family_importance_top: dict
    family_importance_all: dict
    axis_counts: dict
    axis_importance_top: dict
    axis_importance_all: dict

    def to_dict(self):
        d = asdict(self)
        d["top"] = [{"name": n, "importance": v} for n, v in self.top]
        return d


def _family_label(desc):
    return desc.family.short


def aggregate_importance(model, schema, top_k=10):
    """Rank features by Gini importance and break the ranking down by
    feature type and by axis.

    Only models trained on raw (un-projected) features are accepted.
    """
    if not isinstance(model, (DecisionTree, RandomForest)):
        raise NotTreeBased(f"{type(model).__name__} has no Gini importances")
    if any(d.family is Family.PCA for d in schema):
        raise PcaModelRejected("importances of PCA projections are not attributable to features")
    if model.n_features_in_ != len(schema):
        raise SchemaMismatch(f"model has {model.n_features_in_} features, schema {len(schema)}")
    imp = gini_importance(model)
    order = sorted(range(len(schema)), key=lambda i: (-imp[i], i))[:top_k]
    top = [(schema[i].name, float(imp[i])) for i in order]

    def tally(key, labels, indices):
        counts = Counter(key(schema[i]) for i in indices)
        sums = Counter()
        for i in indices:
            sums[key(schema[i])] += float(imp[i])
        return {lab: counts.get(lab, 0) for lab in labels}, {lab: sums.get(lab, 0.0) for lab in labels}

    everything = range(len(schema))
    fam_counts, fam_top = tally(_family_label, IMPORTANCE_FAMILIES, order)
    _, fam_all = tally(_family_label, IMPORTANCE_FAMILIES, everything)
    axis_key = lambda d: d.axis  # noqa: E731
    ax_counts, ax_top = tally(axis_key, AXES, order)
    _, ax_all = tally(axis_key, AXES, everything)
    return ImportanceAggregate(top, fam_counts, fam_top, fam_all, ax_counts, ax_top, ax_all)


def run_importance(dataset, algorithms=("dt", "rf"), top_k=10, seed=0, split=None, model_params=None):
    """Fit tree models on standardized raw features and aggregate importances."""
    split = _split(dataset, seed, split)
    pre = Preprocessor().fit(dataset, split)
    Xtr, ytr, Xte, yte = pre.train_test(dataset)
    out = {}
    for alg in algorithms:
        model = make_model(alg, **_model_params(alg, seed, model_params)).fit(Xtr, ytr)
        agg = aggregate_importance(model, dataset.schema, top_k)
        out[alg] = {"accuracy": accuracy(model.predict(Xte), yte), **agg.to_dict()}
    return out


def emit_report(results, path, fmt="json", study="", config=None, importance=None, extra=None):
    """Write scenario results as JSON or CSV.

    Keys and rows keep a fixed order so that identical runs produce
    identical files apart from timings.
    """
    rows = [row for r in results for row in r.rows()]
    if fmt == "json":
        doc = {
            "study": study,
            "config": config or {},
            "scenarios": rows,
            "importance": importance or {},
        }
        if extra:
            doc.update(extra)
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2, sort_keys=False)
            fh.write("\n")
    elif fmt == "csv":
        fields = ["study", "id", "algorithm", "accuracy", "k", "family", "seed", "n_features", "duration_ms"]
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=fields)
            writer.writeheader()
            for row in rows:
                writer.writerow({"study": study, **row})
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    return path


def load_report(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def scenario_accuracies(rows):
    """``{(id, algorithm): accuracy}`` from report rows."""
    return {(r["id"], r["algorithm"]): r["accuracy"] for r in rows}


def majority_accuracy(labels):
    labels = np.asarray(labels)
    return float(np.bincount(labels).max() / labels.size)
