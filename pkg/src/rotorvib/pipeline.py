"""Leakage-safe preparation: stratified splitting, standardization, masked
PCA and feature-family selection.

Transformers follow the scikit-learn estimator protocol.  :class:`Preprocessor`
is the only place that fits them inside a study, and it can only see the
training rows of a :class:`Split`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import (
    EmptyDataset,
    EmptyMask,
    EmptyMatrix,
    KTooLarge,
    LeakageError,
    SchemaMismatch,
    SingleClass,
    UnknownFamily,
)
from .features.schema import Family, FeatureSchema, pca_schema


@dataclass
class Dataset:
    X: np.ndarray
    y: np.ndarray
    experiment_ids: np.ndarray
    schema: FeatureSchema

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=int)
        self.experiment_ids = np.asarray(self.experiment_ids, dtype=object)
        if self.X.ndim != 2:
            raise ValueError("X must be 2-D")
        n = self.X.shape[0]
        if not (len(self.y) == len(self.experiment_ids) == n):
            raise ValueError("X, y and experiment_ids must have the same number of rows")
        if self.X.shape[1] != len(self.schema):
            raise SchemaMismatch(f"{self.X.shape[1]} columns but schema has {len(self.schema)}")
        if not np.all(np.isfinite(self.X)):
            raise ValueError("dataset contains NaN or Inf")

    def __len__(self):
        return self.X.shape[0]

    def take(self, rows):
        rows = np.asarray(rows, dtype=int)
        return Dataset(self.X[rows], self.y[rows], self.experiment_ids[rows], self.schema)

    def columns(self, cols):
        cols = list(cols)
        return Dataset(self.X[:, cols], self.y, self.experiment_ids, self.schema.subset(cols))


@dataclass(frozen=True)
class Split:
    train: np.ndarray
    test: np.ndarray
    seed: int
    train_fraction: float
    mode: str = "window"

    def __post_init__(self):
        if np.intersect1d(self.train, self.test).size:
            raise LeakageError("train and test indices overlap")

    def to_dict(self):
        return {"seed": self.seed, "train_fraction": self.train_fraction, "mode": self.mode,
                "n_train": int(self.train.size), "n_test": int(self.test.size)}


def _round_half_up(x):
    # guard against 0.7 * 480 = 335.99999999999994
    return int(math.floor(x + 0.5 + 1e-9))


def stratified_split(dataset_or_labels, train_fraction=0.7, seed=0, mode="window", groups=None):
    """Per-class seeded shuffle, first ``round(fraction * count)`` rows train.

    ``mode="experiment"`` stratifies whole experiments instead of windows, so
    no experiment straddles train and test.
    """
    if isinstance(dataset_or_labels, Dataset):
        labels = dataset_or_labels.y
        groups = dataset_or_labels.experiment_ids if groups is None else groups
    else:
        labels = np.asarray(dataset_or_labels, dtype=int)
    if labels.size == 0:
        raise EmptyDataset("cannot split an empty dataset")
    if not 0 < train_fraction < 1:
        raise ValueError("train_fraction must be in (0, 1)")
    classes = np.unique(labels)
    if classes.size < 2:
        raise SingleClass("both classes must be present to stratify")
    rng = np.random.default_rng(seed)
    train = []
    if mode == "window":
        for c in classes:
            idx = np.flatnonzero(labels == c)
            rng.shuffle(idx)
            train.append(idx[: _round_half_up(train_fraction * idx.size)])
    elif mode == "experiment":
        if groups is None:
            raise ValueError("experiment mode needs experiment ids")
        groups = np.asarray(groups, dtype=object)
        for c in classes:
            exp = np.array(sorted(set(groups[labels == c])), dtype=object)
            rng.shuffle(exp)
            chosen = set(exp[: _round_half_up(train_fraction * exp.size)])
            train.append(np.flatnonzero([(g in chosen) and lab == c for g, lab in zip(groups, labels)]))
    else:
        raise ValueError(f"unknown split mode {mode!r}")
    train = np.sort(np.concatenate(train))
    test = np.setdiff1d(np.arange(labels.size), train)
    return Split(train, test, seed, train_fraction, mode)


class Standardizer(TransformerMixin, BaseEstimator):
    """Per-column z-score with population std.

    Zero-variance columns are only centered (``constant_`` marks them).
    """

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64, ensure_min_samples=0)
        if X.shape[0] == 0:
            raise EmptyMatrix("cannot fit on an empty matrix")
        self.mean_ = X.mean(axis=0)
        std = X.std(axis=0, ddof=0)
        self.constant_ = std == 0
        self.std_ = std
        self.scale_ = np.where(self.constant_, 1.0, std)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "mean_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise SchemaMismatch(f"expected {self.n_features_in_} columns, got {X.shape[1]}")
        return (X - self.mean_) / self.scale_

    def to_dict(self):
        return {"mean": self.mean_.tolist(), "std": self.std_.tolist()}

    @classmethod
    def from_dict(cls, d):
        self = cls()
        self.mean_ = np.asarray(d["mean"], dtype=np.float64)
        self.std_ = np.asarray(d["std"], dtype=np.float64)
        self.constant_ = self.std_ == 0
        self.scale_ = np.where(self.constant_, 1.0, self.std_)
        self.n_features_in_ = self.mean_.size
        return self


def fit_scaler(train):
    return Standardizer().fit(train)


def apply_scaler(params, matrix):
    return params.transform(matrix)


def _eigh_desc(sym):
    vals, vecs = np.linalg.eigh(sym)
    order = np.argsort(vals)[::-1]
    return np.clip(vals[order], 0.0, None), vecs[:, order]


class MaskedPCA(TransformerMixin, BaseEstimator):
    """PCA applied to a subset of columns.

    Output is the untouched columns (original order) followed by
    ``n_components`` projections of the masked block.  ``mask=None`` means
    all columns.  Each component is signed so its largest-magnitude loading
    is positive.
    """

    def __init__(self, n_components=10, mask=None):
        self.n_components = n_components
        self.mask = mask

    def _mask(self, n_features):
        if self.mask is None:
            return np.ones(n_features, dtype=bool)
        mask = np.asarray(self.mask, dtype=bool)
        if mask.size != n_features:
            raise SchemaMismatch(f"mask has {mask.size} entries for {n_features} columns")
        return mask

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        mask = self._mask(X.shape[1])
        if not mask.any():
            raise EmptyMask("PCA mask selects no columns")
        block = X[:, mask]
        n, p = block.shape
        k = self.n_components
        if not 1 <= k <= min(n - 1, p):
            raise KTooLarge(f"n_components={k} outside [1, {min(n - 1, p)}]")
        self.mask_ = mask
        self.mean_ = block.mean(axis=0)
        centered = block - self.mean_
        total_var = float(np.sum(centered ** 2) / (n - 1))
        vals, comps = None, None
        if n < p:
            # same non-zero spectrum as the covariance, from the n x n Gram matrix
            vals, u = _eigh_desc(centered @ centered.T / (n - 1))
            top = vals[:k]
            if top[-1] > 1e-12 * max(top[0], 1e-300):
                r = int(np.sum(vals > 1e-12 * vals[0]))
                vals, u = vals[:r], u[:, :r]
                comps = (centered.T @ u / np.sqrt(vals * (n - 1))).T
            else:
                vals = None
        if vals is None:
            vals, v = _eigh_desc(centered.T @ centered / (n - 1))
            comps = v.T
        flip = np.sign(comps[np.arange(comps.shape[0]), np.argmax(np.abs(comps), axis=1)])
        flip[flip == 0] = 1.0
        self.all_components_ = comps * flip[:, None]
        self.all_explained_variance_ = vals[: comps.shape[0]]
        self.total_variance_ = total_var
        self.n_features_in_ = X.shape[1]
        return self

    @property
    def components_(self):
        return self.all_components_[: self.n_components]

    @property
    def explained_variance_(self):
        return self.all_explained_variance_[: self.n_components]

    @property
    def explained_variance_ratio_(self):
        if self.total_variance_ == 0:
            return np.zeros(self.n_components)
        return self.explained_variance_ / self.total_variance_

    def with_components(self, k):
        """Copy sharing the fitted eigenbasis, truncated to ``k`` components."""
        check_is_fitted(self, "all_components_")
        if not 1 <= k <= self.all_components_.shape[0]:
            raise KTooLarge(f"only {self.all_components_.shape[0]} components available")
        other = MaskedPCA(k, self.mask)
        other.__dict__.update({a: v for a, v in self.__dict__.items() if a.endswith("_")})
        return other

    def transform(self, X):
        check_is_fitted(self, "all_components_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise SchemaMismatch(f"expected {self.n_features_in_} columns, got {X.shape[1]}")
        proj = (X[:, self.mask_] - self.mean_) @ self.components_.T
        return np.hstack([X[:, ~self.mask_], proj])

    def inverse_transform_block(self, projected):
        """Reconstruct the masked block from its projections."""
        return projected @ self.components_ + self.mean_

    def transform_schema(self, schema):
        kept = [d for d, m in zip(schema, self.mask_) if not m]
        return FeatureSchema(kept + pca_schema(self.n_components))

    def to_dict(self, schema=None):
        d = {
            "n_components": self.n_components,
            "mean": self.mean_.tolist(),
            "components": self.components_.tolist(),
            "explained_variance": self.explained_variance_.tolist(),
            "total_variance": self.total_variance_,
            "n_features": int(self.n_features_in_),
        }
        if schema is not None:
            d["mask"] = [n for n, m in zip(schema.names, self.mask_) if m]
        else:
            d["mask_indices"] = np.flatnonzero(self.mask_).tolist()
        return d

    @classmethod
    def from_dict(cls, d, schema=None):
        if "mask" in d:
            if schema is None:
                raise ValueError("schema needed to resolve a name mask")
            chosen = set(d["mask"])
            mask = np.array([n in chosen for n in schema.names])
        else:
            mask = np.zeros(d["n_features"], dtype=bool)
            mask[d["mask_indices"]] = True
        self = cls(d["n_components"], mask)
        self.mask_ = mask
        self.mean_ = np.asarray(d["mean"], dtype=np.float64)
        self.all_components_ = np.asarray(d["components"], dtype=np.float64)
        self.all_explained_variance_ = np.asarray(d["explained_variance"], dtype=np.float64)
        self.total_variance_ = float(d["total_variance"])
        self.n_features_in_ = mask.size
        return self


def fit_pca(train, k, subset_mask=None):
    return MaskedPCA(k, subset_mask).fit(train)


def transform_pca(model, matrix):
    return model.transform(matrix)


def select_family(dataset, family):
    """Keep only the columns of one feature family."""
    return dataset.columns(dataset.schema.indices(family))


class FamilySelector(TransformerMixin, BaseEstimator):
    def __init__(self, schema=None, family=Family.STFT):
        self.schema = schema
        self.family = family

    def fit(self, X=None, y=None):
        self.columns_ = np.asarray(self.schema.indices(self.family))
        return self

    def transform(self, X):
        check_is_fitted(self, "columns_")
        return np.asarray(X)[:, self.columns_]


def family_mask(schema, family):
    if family in (None, "all", "ALL"):
        return np.ones(len(schema), dtype=bool)
    mask = np.array(schema.mask(family))
    if not mask.any():
        raise UnknownFamily(f"family {family} not present in schema")
    return mask


class Preprocessor:
    """Scaler (+ optional masked PCA) fitted on a split's training rows.

    ``fit`` takes the full dataset and the split rather than a matrix, so
    there is no way to pass it test rows.
    """

    def __init__(self, pca_components=None, pca_family=None):
        self.pca_components = pca_components
        self.pca_family = pca_family

    def fit(self, dataset, split):
        if np.intersect1d(split.train, split.test).size:
            raise LeakageError("train and test indices overlap")
        if split.train.size and split.train.max() >= len(dataset):
            raise LeakageError("split does not belong to this dataset")
        train = dataset.X[split.train]
        self.split_ = split
        self.schema_in_ = dataset.schema
        self.scaler_ = Standardizer().fit(train)
        self.pca_ = None
        self.schema_out_ = dataset.schema
        if self.pca_components:
            mask = family_mask(dataset.schema, self.pca_family)
            self.pca_ = MaskedPCA(self.pca_components, mask).fit(self.scaler_.transform(train))
            self.schema_out_ = self.pca_.transform_schema(dataset.schema)
        return self

    def with_pca(self, pca):
        """Same scaler, different (already fitted) PCA."""
        other = Preprocessor(pca.n_components, self.pca_family)
        other.__dict__.update(self.__dict__)
        other.pca_components = pca.n_components
        other.pca_ = pca
        other.schema_out_ = pca.transform_schema(self.schema_in_)
        return other

    def transform(self, X):
        Z = self.scaler_.transform(X)
        return self.pca_.transform(Z) if self.pca_ is not None else Z

    def train_test(self, dataset):
        Xtr = self.transform(dataset.X[self.split_.train])
        Xte = self.transform(dataset.X[self.split_.test])
        return Xtr, dataset.y[self.split_.train], Xte, dataset.y[self.split_.test]

    def to_dict(self):
        d = {"scaler": self.scaler_.to_dict(), "pca": None, "pca_family": _family_name(self.pca_family)}
        if self.pca_ is not None:
            d["pca"] = self.pca_.to_dict(self.schema_in_)
        return d

    @classmethod
    def from_dict(cls, d, schema):
        pca = MaskedPCA.from_dict(d["pca"], schema) if d.get("pca") else None
        self = cls(pca.n_components if pca else None, d.get("pca_family"))
        self.scaler_ = Standardizer.from_dict(d["scaler"])
        self.pca_ = pca
        self.schema_in_ = schema
        self.schema_out_ = pca.transform_schema(schema) if pca else schema
        return self


def _family_name(family):
    if family is None or isinstance(family, str):
        return family
    return family.value
