from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from ..exceptions import EmptyTrainSet, SchemaMismatch


class KnnClassifier(ClassifierMixin, BaseEstimator):
    """Brute-force k-nearest-neighbour vote with Euclidean distance.

    Equal distances rank the lower training row first.  A tied vote goes to
    whichever tied class owns the nearest neighbour.
    """

    def __init__(self, n_neighbors=5):
        self.n_neighbors = n_neighbors

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64, ensure_min_samples=0)
        if X.shape[0] == 0:
            raise EmptyTrainSet("no training rows")
        if not 1 <= self.n_neighbors <= X.shape[0]:
            raise ValueError(f"n_neighbors must be in [1, {X.shape[0]}]")
        self.classes_, self._y = np.unique(y, return_inverse=True)
        self._X = X
        self.n_features_in_ = X.shape[1]
        return self

    def kneighbors(self, X):
        """Indices of the k nearest training rows per query, nearest first."""
        check_is_fitted(self, "_X")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise SchemaMismatch(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        k = self.n_neighbors
        out = np.empty((X.shape[0], k), dtype=np.int64)
        for i, q in enumerate(X):
            diff = self._X - q
            d2 = np.einsum("ij,ij->i", diff, diff)
            out[i] = np.argsort(d2, kind="stable")[:k]
        return out

    def predict(self, X):
        neigh = self.kneighbors(X)
        labels = self._y[neigh]
        pred = np.empty(labels.shape[0], dtype=np.int64)
        n_classes = len(self.classes_)
        for i, row in enumerate(labels):
            votes = np.bincount(row, minlength=n_classes)
            tied = votes == votes.max()
            # first neighbour (in distance order) whose class is among the tied
            pred[i] = row[np.argmax(tied[row])]
        return self.classes_[pred]
