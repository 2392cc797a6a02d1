"""Soft-margin SVM trained by sequential minimal optimization.

The dual ``min 1/2 a'Qa - e'a  s.t.  0 <= a <= C, y'a = 0`` is solved with
maximal-violating-pair selection using second-order information for the
second index, stopping when the KKT gap drops below ``tol``.
"""
from __future__ import annotations

import warnings

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from ..exceptions import NoConvergence, SchemaMismatch, SingleClass

_TAU = 1e-12


def rbf_kernel(A, B, gamma):
    sq = (
        np.einsum("ij,ij->i", A, A)[:, None]
        + np.einsum("ij,ij->i", B, B)[None, :]
        - 2.0 * A @ B.T
    )
    return np.exp(-gamma * np.maximum(sq, 0.0))


def linear_kernel(A, B, gamma=None):
    return A @ B.T


KERNELS = {"rbf": rbf_kernel, "linear": linear_kernel}


def smo(K, y, C, tol=1e-3, max_iter=100_000):
    """Solve the dual for kernel matrix ``K`` and labels ``y`` in {-1, +1}.

    Returns ``(alpha, b, n_iter, converged)``.
    """
    n = y.size
    y = y.astype(np.float64)
    alpha = np.zeros(n)
    G = -np.ones(n)  # gradient of the dual objective: Q alpha - e
    diag = np.diag(K).copy()
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        yG = -y * G
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y < 0) & (alpha < C)) | ((y > 0) & (alpha > 0))
        if not up.any() or not low.any():
            converged = True
            break
        i = int(np.flatnonzero(up)[np.argmax(yG[up])])
        m_up = yG[i]
        m_low = yG[low].min()
        if m_up - m_low < tol:
            converged = True
            break
        # second index: largest objective decrease among violating partners
        cand = low & (yG < m_up)
        b = m_up - yG[cand]
        a = diag[i] + diag[cand] - 2.0 * K[i, cand]
        a = np.where(a > 0, a, _TAU)
        j = int(np.flatnonzero(cand)[np.argmax(b * b / a)])

        Kii, Kjj, Kij = K[i, i], K[j, j], K[i, j]
        quad = Kii + Kjj - 2.0 * Kij
        if quad <= 0:
            quad = _TAU
        ai, aj = alpha[i], alpha[j]
        if y[i] != y[j]:
            delta = (-G[i] - G[j]) / quad
            diff = ai - aj
            ai_new, aj_new = ai + delta, aj + delta
            if diff > 0:
                if aj_new < 0:
                    aj_new, ai_new = 0.0, diff
            elif ai_new < 0:
                ai_new, aj_new = 0.0, -diff
            if diff > 0:
                if ai_new > C:
                    ai_new, aj_new = C, C - diff
            elif aj_new > C:
                aj_new, ai_new = C, C + diff
        else:
            delta = (G[i] - G[j]) / quad
            total = ai + aj
            ai_new, aj_new = ai - delta, aj + delta
            if total > C:
                if ai_new > C:
                    ai_new, aj_new = C, total - C
            elif aj_new < 0:
                aj_new, ai_new = 0.0, total
            if total > C:
                if aj_new > C:
                    aj_new, ai_new = C, total - C
            elif ai_new < 0:
                ai_new, aj_new = 0.0, total
        d_i, d_j = ai_new - ai, aj_new - aj
        alpha[i], alpha[j] = ai_new, aj_new
        # Q[:, t] = y * y_t * K[:, t]
        G += y * (y[i] * d_i * K[:, i] + y[j] * d_j * K[:, j])
    else:
        it = max_iter

    b = _bias(alpha, y, G, C)
    return np.clip(alpha, 0.0, C), b, it, converged


def _bias(alpha, y, G, C):
    yG = y * G
    free = (alpha > 0) & (alpha < C)
    if free.any():
        rho = yG[free].mean()
    else:
        at_upper = alpha >= C
        at_lower = alpha <= 0
        ub_mask = (at_upper & (y < 0)) | (at_lower & (y > 0))
        lb_mask = (at_upper & (y > 0)) | (at_lower & (y < 0))
        ub = yG[ub_mask].min() if ub_mask.any() else np.inf
        lb = yG[lb_mask].max() if lb_mask.any() else -np.inf
        rho = (ub + lb) / 2.0 if np.isfinite(ub) and np.isfinite(lb) else (
            ub if np.isfinite(ub) else lb
        )
    return -float(rho)


class SvmClassifier(ClassifierMixin, BaseEstimator):
    """Binary kernel SVM.

    ``gamma="scale"`` resolves to ``1 / (n_features * mean column variance)``
    of the training matrix.  ``classes_[1]`` is the positive side of the
    decision function.  If ``max_passes * n_samples`` SMO steps pass without
    meeting ``tol``, the last iterate is kept, ``converged_`` is False and a
    :class:`NoConvergence` warning is issued.
    """

    def __init__(self, kernel="rbf", C=1.0, gamma="scale", tol=1e-3, max_passes=200):
        self.kernel = kernel
        self.C = C
        self.gamma = gamma
        self.tol = tol
        self.max_passes = max_passes

    def _gamma(self, X):
        if self.gamma == "scale":
            var = X.var(axis=0).mean()
            return 1.0 / (X.shape[1] * var) if var > 0 else 1.0
        return float(self.gamma)

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64)
        self.classes_, y_enc = np.unique(y, return_inverse=True)
        if len(self.classes_) != 2:
            raise SingleClass("SVM needs exactly two classes")
        if self.kernel not in KERNELS:
            raise ValueError(f"unknown kernel {self.kernel!r}")
        ys = np.where(y_enc == 1, 1.0, -1.0)
        self.gamma_ = self._gamma(X)
        K = KERNELS[self.kernel](X, X, self.gamma_)
        alpha, b, n_iter, converged = smo(
            K, ys, self.C, self.tol, max(1, self.max_passes * X.shape[0])
        )
        sv = alpha > 0
        self.support_ = np.flatnonzero(sv)
        self.support_vectors_ = X[sv]
        self.dual_coef_ = (alpha * ys)[sv]
        self.alpha_ = alpha
        self.intercept_ = b
        self.n_iter_ = n_iter
        self.converged_ = converged
        self.n_features_in_ = X.shape[1]
        if not converged:
            warnings.warn(
                f"SMO stopped after {n_iter} steps without reaching tol={self.tol}",
                NoConvergence,
                stacklevel=2,
            )
        return self

    def decision_function(self, X):
        check_is_fitted(self, "dual_coef_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise SchemaMismatch(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        if self.support_vectors_.shape[0] == 0:
            return np.full(X.shape[0], self.intercept_)
        K = KERNELS[self.kernel](X, self.support_vectors_, self.gamma_)
        return K @ self.dual_coef_ + self.intercept_

    def predict(self, X):
        return self.classes_[(self.decision_function(X) > 0).astype(int)]
