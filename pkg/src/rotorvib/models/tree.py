"""CART decision tree and random forest (Gini criterion)."""
from __future__ import annotations

import numpy as np
from joblib import Parallel, delayed
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from ..exceptions import EmptyTrainSet, NotTreeBased, SchemaMismatch

# tolerance for "strictly better" and for declaring two split scores tied
_TIE_RTOL = 1e-12


class TreeStructure:
    """Flat array form of a fitted tree; node 0 is the root.

    Leaves have ``feature == -1``.  ``counts`` holds per-class (weighted)
    sample counts reaching each node, ``impurity`` its Gini impurity.
    """

    def __init__(self, feature, threshold, left, right, counts, impurity, n_samples):
        self.feature = np.asarray(feature, dtype=np.int64)
        self.threshold = np.asarray(threshold, dtype=np.float64)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.counts = np.asarray(counts, dtype=np.float64)
        self.impurity = np.asarray(impurity, dtype=np.float64)
        self.n_samples = np.asarray(n_samples, dtype=np.float64)

    @property
    def node_count(self):
        return self.feature.size

    @property
    def is_leaf(self):
        return self.feature < 0

    def depth(self):
        depth = np.zeros(self.node_count, dtype=int)
        for node in range(self.node_count):
            if self.feature[node] >= 0:
                depth[self.left[node]] = depth[node] + 1
                depth[self.right[node]] = depth[node] + 1
        return int(depth.max())

    def apply(self, X):
        node = np.zeros(X.shape[0], dtype=np.int64)
        active = self.feature[node] >= 0
        while active.any():
            rows = np.flatnonzero(active)
            n = node[rows]
            go_left = X[rows, self.feature[n]] <= self.threshold[n]
            node[rows] = np.where(go_left, self.left[n], self.right[n])
            active[rows] = self.feature[node[rows]] >= 0
        return node

    def raw_importances(self, n_features):
        """Sum over split nodes of ``weight * impurity decrease``, unnormalized."""
        imp = np.zeros(n_features)
        total = self.n_samples[0]
        for node in np.flatnonzero(self.feature >= 0):
            l, r = self.left[node], self.right[node]
            dec = (
                self.n_samples[node] * self.impurity[node]
                - self.n_samples[l] * self.impurity[l]
                - self.n_samples[r] * self.impurity[r]
            )
            imp[self.feature[node]] += dec / total
        return imp

    def to_nested(self, node=0):
        counts = self.counts[node].tolist()
        if self.feature[node] < 0:
            return {"counts": counts}
        return {
            "feature": int(self.feature[node]),
            "threshold": float(self.threshold[node]),
            "counts": counts,
            "left": self.to_nested(int(self.left[node])),
            "right": self.to_nested(int(self.right[node])),
        }

    @classmethod
    def from_nested(cls, root):
        feature, threshold, left, right, counts, impurity, n_samples = ([] for _ in range(7))
        stack = [(root, None, None)]
        while stack:
            d, parent, side = stack.pop()
            node = len(feature)
            if parent is not None:
                (left if side == "l" else right)[parent] = node
            c = np.asarray(d["counts"], dtype=np.float64)
            n = c.sum()
            counts.append(c)
            n_samples.append(n)
            impurity.append(1.0 - np.sum((c / n) ** 2) if n else 0.0)
            feature.append(d.get("feature", -1))
            threshold.append(d.get("threshold", 0.0))
            left.append(-1)
            right.append(-1)
            if "feature" in d:
                stack.append((d["right"], node, "r"))
                stack.append((d["left"], node, "l"))
        return cls(feature, threshold, left, right, counts, impurity, n_samples)


def gini(counts):
    counts = np.asarray(counts, dtype=np.float64)
    n = counts.sum()
    return 0.0 if n == 0 else 1.0 - float(np.sum((counts / n) ** 2))


def best_split(Xn, yn, n_classes, features):
    """Exhaustive search over ``features`` (column indices into ``Xn``).

    Maximizes ``sum_c L_c^2/n_L + sum_c R_c^2/n_R`` (equivalently minimizes
    the weighted child Gini).  Candidate thresholds are midpoints of
    consecutive distinct sorted values; rows with ``x <= threshold`` go left.
    Ties resolve to the lowest feature index, then the lowest threshold.

    Returns ``(feature, threshold, score)`` or ``None`` when every feature
    is constant.
    """
    n = yn.size
    sub = Xn[:, features]
    order = np.argsort(sub, axis=0, kind="stable")
    xs = np.take_along_axis(sub, order, axis=0)
    ys = yn[order]
    valid = xs[:-1] < xs[1:]
    if not valid.any():
        return None
    n_left = np.arange(1, n, dtype=np.float64)[:, None]
    n_right = n - n_left
    score = np.zeros_like(xs[:-1])
    for c in range(n_classes):
        cum = np.cumsum(ys == c, axis=0, dtype=np.float64)[:-1]
        total_c = float(np.sum(yn == c))
        score += cum ** 2 / n_left + (total_c - cum) ** 2 / n_right
    score = np.where(valid, score, -np.inf)
    best = score.max()
    tied_pos, tied_feat = np.nonzero(score >= best - _TIE_RTOL * max(abs(best), 1.0))
    feat_ids = np.asarray(features)[tied_feat]
    lo, hi = xs[tied_pos, tied_feat], xs[tied_pos + 1, tied_feat]
    thr = (lo + hi) / 2.0
    thr = np.where(thr >= hi, lo, thr)
    pick = np.lexsort((thr, feat_ids))[0]
    return int(feat_ids[pick]), float(thr[pick]), float(best)


def build_tree(X, y, n_classes, sample_idx=None, max_depth=None, min_samples_split=2,
               max_features=None, rng=None):
    """Greedy CART growth.  ``y`` holds class codes ``0..n_classes-1``.

    With ``max_features`` set, each node draws features in random order
    until that many non-constant ones are found.
    """
    n_total_features = X.shape[1]
    if sample_idx is None:
        sample_idx = np.arange(X.shape[0])
    feature, threshold, left, right, counts, impurity, n_samples = ([] for _ in range(7))

    def new_node(idx):
        c = np.bincount(y[idx], minlength=n_classes).astype(np.float64)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        counts.append(c)
        impurity.append(gini(c))
        n_samples.append(float(idx.size))
        return len(feature) - 1

    root = new_node(sample_idx)
    stack = [(root, sample_idx, 0)]
    while stack:
        node, idx, depth = stack.pop()
        if impurity[node] == 0.0 or idx.size < min_samples_split:
            continue
        if max_depth is not None and depth >= max_depth:
            continue
        Xn, yn = X[idx], y[idx]
        if max_features is None or max_features >= n_total_features:
            features = np.arange(n_total_features)
        else:
            features = _draw_features(Xn, max_features, rng)
        if len(features) == 0:
            continue
        found = best_split(Xn, yn, n_classes, features)
        if found is None:
            continue
        f, thr, _ = found
        go_left = Xn[:, f] <= thr
        l_idx, r_idx = idx[go_left], idx[~go_left]
        feature[node] = f
        threshold[node] = thr
        l_node = new_node(l_idx)
        r_node = new_node(r_idx)
        left[node], right[node] = l_node, r_node
        stack.append((r_node, r_idx, depth + 1))
        stack.append((l_node, l_idx, depth + 1))
    return TreeStructure(feature, threshold, left, right, counts, impurity, n_samples)


def _draw_features(Xn, m, rng):
    perm = rng.permutation(Xn.shape[1])
    chosen = []
    for start in range(0, perm.size, m):
        chunk = perm[start:start + m]
        block = Xn[:, chunk]
        nonconst = chunk[block.min(axis=0) < block.max(axis=0)]
        chosen.extend(nonconst.tolist())
        if len(chosen) >= m:
            break
    return np.sort(np.asarray(chosen[:m], dtype=np.int64))


class _TreeMixin:
    def _encode(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64, ensure_min_samples=0)
        if X.shape[0] == 0:
            raise EmptyTrainSet("no training rows")
        self.classes_, y_enc = np.unique(y, return_inverse=True)
        self.n_features_in_ = X.shape[1]
        return X, y_enc

    def _check_X(self, X):
        check_is_fitted(self, "classes_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise SchemaMismatch(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        return X


class DecisionTree(_TreeMixin, ClassifierMixin, BaseEstimator):
    """CART classifier with Gini impurity and midpoint thresholds."""

    def __init__(self, max_depth=None, min_samples_split=2, max_features=None, random_state=None):
        self.max_depth = max_depth
        self.min_samples_split = min_samples_split
        self.max_features = max_features
        self.random_state = random_state

    def fit(self, X, y):
        X, y_enc = self._encode(X, y)
        rng = np.random.default_rng(self.random_state)
        m = _resolve_max_features(self.max_features, X.shape[1])
        self.tree_ = build_tree(
            X, y_enc, len(self.classes_), None, self.max_depth, self.min_samples_split, m, rng
        )
        return self

    def predict_proba(self, X):
        X = self._check_X(X)
        c = self.tree_.counts[self.tree_.apply(X)]
        return c / c.sum(axis=1, keepdims=True)

    def predict(self, X):
        X = self._check_X(X)
        c = self.tree_.counts[self.tree_.apply(X)]
        return self.classes_[np.argmax(c, axis=1)]

    @property
    def feature_importances_(self):
        check_is_fitted(self, "tree_")
        return _normalize(self.tree_.raw_importances(self.n_features_in_))


def _normalize(imp):
    total = imp.sum()
    return imp / total if total > 0 else imp


def _resolve_max_features(max_features, n_features):
    if max_features is None:
        return None
    if max_features == "sqrt":
        return max(1, int(np.floor(np.sqrt(n_features))))
    if max_features == "log2":
        return max(1, int(np.floor(np.log2(n_features))))
    if isinstance(max_features, float):
        return max(1, int(max_features * n_features))
    return int(max_features)


def _grow_one(X, y_enc, n_classes, seed_seq, bootstrap, max_depth, min_samples_split, m):
    rng = np.random.default_rng(seed_seq)
    n = X.shape[0]
    idx = np.sort(rng.integers(0, n, n)) if bootstrap else np.arange(n)
    return build_tree(X, y_enc, n_classes, idx, max_depth, min_samples_split, m, rng)


class RandomForest(_TreeMixin, ClassifierMixin, BaseEstimator):
    """Bagged CART trees with per-split feature subsampling.

    Majority vote; an even split of votes goes to ``classes_[tie_class]``
    (class 0, i.e. normal, by default).  Tree ``t`` draws its randomness from
    the ``t``-th child of ``SeedSequence(random_state)``, so the fitted forest
    does not depend on ``n_jobs``.
    """

    def __init__(self, n_estimators=100, max_features="sqrt", bootstrap=True, max_depth=None,
                 min_samples_split=2, random_state=0, n_jobs=None, tie_class=0):
        self.n_estimators = n_estimators
        self.max_features = max_features
        self.bootstrap = bootstrap
        self.max_depth = max_depth
        self.min_samples_split = min_samples_split
        self.random_state = random_state
        self.n_jobs = n_jobs
        self.tie_class = tie_class

    def fit(self, X, y):
        if self.n_estimators < 1:
            raise ValueError("n_estimators must be >= 1")
        X, y_enc = self._encode(X, y)
        m = _resolve_max_features(self.max_features, X.shape[1])
        seeds = np.random.SeedSequence(self.random_state).spawn(self.n_estimators)
        args = (self.bootstrap, self.max_depth, self.min_samples_split, m)
        if self.n_jobs in (None, 1):
            trees = [_grow_one(X, y_enc, len(self.classes_), s, *args) for s in seeds]
        else:
            trees = Parallel(n_jobs=self.n_jobs)(
                delayed(_grow_one)(X, y_enc, len(self.classes_), s, *args) for s in seeds
            )
        self.trees_ = trees
        return self

    def _votes(self, X):
        X = self._check_X(X)
        votes = np.zeros((X.shape[0], len(self.classes_)))
        rows = np.arange(X.shape[0])
        for tree in self.trees_:
            votes[rows, np.argmax(tree.counts[tree.apply(X)], axis=1)] += 1
        return votes

    def predict(self, X):
        votes = self._votes(X)
        top = votes.max(axis=1, keepdims=True)
        tied = (votes == top).sum(axis=1) > 1
        pred = np.argmax(votes, axis=1)
        pred[tied] = self.tie_class
        return self.classes_[pred]

    def predict_proba(self, X):
        votes = self._votes(X)
        return votes / votes.sum(axis=1, keepdims=True)

    @property
    def feature_importances_(self):
        check_is_fitted(self, "trees_")
        per_tree = [_normalize(t.raw_importances(self.n_features_in_)) for t in self.trees_]
        return _normalize(np.mean(per_tree, axis=0))


def gini_importance(model):
    """Normalized Gini importances of a fitted tree or forest.

    Sums to 1 unless the model never split, in which case all zeros.
    """
    if not isinstance(model, (DecisionTree, RandomForest)):
        raise NotTreeBased(f"{type(model).__name__} has no Gini importances")
    return model.feature_importances_
