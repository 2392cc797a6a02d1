"""JSON round trip for fitted classifiers.

Every payload carries the fingerprint of the feature schema the model was
trained on; :func:`load_model` refuses a payload whose fingerprint differs
from the one the caller expects.
"""
import json

import numpy as np

from ..exceptions import ConfigInvalid, SchemaMismatch
from .knn import KnnClassifier
from .svm import SvmClassifier
from .tree import DecisionTree, RandomForest, TreeStructure

ALGORITHMS = {
    "dt": DecisionTree,
    "rf": RandomForest,
    "knn": KnnClassifier,
    "svm": SvmClassifier,
}
_NAMES = {cls: name for name, cls in ALGORITHMS.items()}


def model_to_dict(model, fingerprint=None):
    kind = _NAMES.get(type(model))
    if kind is None:
        raise ConfigInvalid(f"cannot serialize {type(model).__name__}")
    d = {
        "algorithm": kind,
        "params": model.get_params(),
        "schema_fingerprint": fingerprint,
        "classes": model.classes_.tolist(),
        "n_features": int(model.n_features_in_),
    }
    if kind == "dt":
        d["tree"] = model.tree_.to_nested()
    elif kind == "rf":
        d["trees"] = [t.to_nested() for t in model.trees_]
    elif kind == "knn":
        d["X"] = model._X.tolist()
        d["y"] = model._y.tolist()
    else:
        d.update(
            gamma=model.gamma_,
            support_vectors=model.support_vectors_.tolist(),
            dual_coef=model.dual_coef_.tolist(),
            support=model.support_.tolist(),
            intercept=model.intercept_,
            converged=bool(model.converged_),
            n_iter=int(model.n_iter_),
        )
    return d


def model_from_dict(d, fingerprint=None):
    if fingerprint is not None and d.get("schema_fingerprint") != fingerprint:
        raise SchemaMismatch(
            f"model trained on schema {d.get('schema_fingerprint')}, data has {fingerprint}"
        )
    kind = d["algorithm"]
    if kind not in ALGORITHMS:
        raise ConfigInvalid(f"unknown algorithm {kind!r}")
    model = ALGORITHMS[kind](**d["params"])
    model.classes_ = np.asarray(d["classes"])
    model.n_features_in_ = d["n_features"]
    if kind == "dt":
        model.tree_ = TreeStructure.from_nested(d["tree"])
    elif kind == "rf":
        model.trees_ = [TreeStructure.from_nested(t) for t in d["trees"]]
    elif kind == "knn":
        model._X = np.asarray(d["X"], dtype=np.float64).reshape(-1, d["n_features"])
        model._y = np.asarray(d["y"], dtype=np.int64)
    else:
        model.gamma_ = d["gamma"]
        model.support_vectors_ = np.asarray(d["support_vectors"], dtype=np.float64).reshape(
            -1, d["n_features"]
        )
        model.dual_coef_ = np.asarray(d["dual_coef"], dtype=np.float64)
        model.support_ = np.asarray(d["support"], dtype=np.int64)
        model.intercept_ = d["intercept"]
        model.converged_ = d["converged"]
        model.n_iter_ = d["n_iter"]
    return model


def save_model(model, path, fingerprint=None):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model, fingerprint), fh)


def load_model(path, fingerprint=None):
    with open(path, encoding="utf-8") as fh:
        return model_from_dict(json.load(fh), fingerprint)
