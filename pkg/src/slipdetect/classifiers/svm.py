"""Soft-margin SVM trained by sequential minimal optimisation.

The dual

    max  sum(a) - 1/2 sum_ij a_i a_j y_i y_j K_ij
    s.t. 0 <= a_i <= C,  sum(a_i y_i) = 0

is solved two variables at a time. The working pair is the maximal violating
pair with second-order selection of the partner (Fan, Chen & Lin, 2005), the
same rule libsvm uses, on a precomputed Gram matrix.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .base import SlipClassifier

_TAU = 1e-12
SUPPORT_CUTOFF = 1e-8


def gaussian_kernel(A, B, gamma):
    """exp(-gamma * ||a - b||^2) for every row pair."""
    A = np.atleast_2d(A)
    B = np.atleast_2d(B)
    sq = (np.einsum("ij,ij->i", A, A)[:, None]
          + np.einsum("ij,ij->i", B, B)[None, :]
          - 2.0 * A @ B.T)
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-gamma * sq)


def linear_kernel(A, B, gamma=None):
    return np.atleast_2d(A) @ np.atleast_2d(B).T


KERNELS = {"gaussian": gaussian_kernel, "linear": linear_kernel}


@dataclass
class SMOResult:
    alpha: np.ndarray
    b: float
    converged: bool
    n_iter: int
    gap: float
    objective: float


def dual_objective(alpha, y, K):
    ay = alpha * y
    return float(alpha.sum() - 0.5 * ay @ K @ ay)


def smo_solve(K, y, C, tol=1e-3, max_iter=100000) -> SMOResult:
    """Solve the SVM dual for Gram matrix ``K`` and labels ``y`` in {-1, +1}.

    Stops when the maximal KKT violation m(a) - M(a) drops below ``tol``.
    """
    n = y.shape[0]
    y = y.astype(float)
    alpha = np.zeros(n)
    grad = -np.ones(n)  # gradient of 1/2 a'Qa - e'a, Q = yy'K
    diag = np.diag(K).copy()
    pos = y > 0
    converged = False
    gap = np.inf
    it = 0
    for it in range(max_iter):
        yg = -y * grad
        up = np.where(pos, alpha < C, alpha > 0)
        low = np.where(pos, alpha > 0, alpha < C)
        yg_up = np.where(up, yg, -np.inf)
        i = int(np.argmax(yg_up))
        m = yg_up[i]
        M = np.min(np.where(low, yg, np.inf))
        gap = m - M
        if gap < tol:
            converged = True
            break
        # second-order partner choice among violating low-set members
        b = m - yg
        a = diag[i] + diag - 2.0 * K[i]
        a = np.where(a > 0, a, _TAU)
        cand = low & (b > 0)
        score = np.where(cand, -(b * b) / a, np.inf)
        j = int(np.argmin(score))

        yi, yj = y[i], y[j]
        ai_old, aj_old = alpha[i], alpha[j]
        quad = max(K[i, i] + K[j, j] - 2.0 * K[i, j], _TAU)
        if yi != yj:
            delta = (-grad[i] - grad[j]) / quad
            diff = ai_old - aj_old
            ai, aj = ai_old + delta, aj_old + delta
            if diff > 0:
                if aj < 0:
                    aj, ai = 0.0, diff
            elif ai < 0:
                ai, aj = 0.0, -diff
            if diff > 0:
                if ai > C:
                    ai, aj = C, C - diff
            elif aj > C:
                aj, ai = C, C + diff
        else:
            delta = (grad[i] - grad[j]) / quad
            total = ai_old + aj_old
            ai, aj = ai_old - delta, aj_old + delta
            if total > C:
                if ai > C:
                    ai, aj = C, total - C
            elif aj < 0:
                aj, ai = 0.0, total
            if total > C:
                if aj > C:
                    aj, ai = C, total - C
            elif ai < 0:
                ai, aj = 0.0, total
        dai, daj = ai - ai_old, aj - aj_old
        alpha[i], alpha[j] = ai, aj
        grad += (yi * dai) * (y * K[i]) + (yj * daj) * (y * K[j])
    else:
        it = max_iter

    # bias from free vectors, else midpoint of the feasible interval
    yg = -y * grad
    free = (alpha > 0) & (alpha < C)
    if np.any(free):
        rho = -float(np.mean(yg[free]))
    else:
        up = np.where(pos, alpha < C, alpha > 0)
        low = np.where(pos, alpha > 0, alpha < C)
        hi = np.max(yg[up]) if np.any(up) else 0.0
        lo = np.min(yg[low]) if np.any(low) else 0.0
        rho = -(hi + lo) / 2.0
    return SMOResult(alpha, -rho, converged, it, float(gap),
                     dual_objective(alpha, y, K))


class SMOSlipClassifier(SlipClassifier):
    """Kernel SVM with a self-contained SMO solver.

    Parameters
    ----------
    kernel : {"gaussian", "linear"}
    C : float
        Box constraint on the dual variables.
    gamma : float
        Gaussian kernel scale, ``exp(-gamma * ||u - v||^2)``.
    tol : float
        Stopping tolerance on the maximal KKT violation.
    max_iter : int
        Pair updates before giving up; the best-so-far model is kept and
        ``converged_`` is set to False.
    """

    kind = "svm"

    def __init__(self, kernel="gaussian", C=1.0, gamma=1.0, tol=1e-3,
                 max_iter=200000):
        self.kernel = kernel
        self.C = C
        self.gamma = gamma
        self.tol = tol
        self.max_iter = max_iter

    def _kernel(self, A, B):
        return KERNELS[self.kernel](A, B, self.gamma)

    def _fit(self, X, y):
        if self.kernel not in KERNELS:
            raise ValueError(f"unknown kernel {self.kernel!r}")
        if self.C <= 0:
            raise ValueError("C must be > 0")
        if self.kernel == "gaussian" and self.gamma <= 0:
            raise ValueError("gamma must be > 0")
        ys = np.where(y == 1, 1.0, -1.0)
        K = self._kernel(X, X)
        res = smo_solve(K, ys, float(self.C), tol=self.tol, max_iter=self.max_iter)
        if not res.converged:
            warnings.warn(
                f"SMO stopped after {res.n_iter} iterations with KKT gap {res.gap:.3g}",
                RuntimeWarning, stacklevel=3)
        sv = res.alpha > SUPPORT_CUTOFF
        self.alpha_ = res.alpha
        self.support_ = np.flatnonzero(sv)
        self.support_vectors_ = X[sv]
        self.dual_coef_ = (res.alpha * ys)[sv]
        self.intercept_ = float(res.b)
        self.converged_ = res.converged
        self.n_iter_ = res.n_iter
        self.kkt_gap_ = res.gap
        self.dual_objective_ = res.objective
        self._set_linear_weights()

    def _set_linear_weights(self):
        if self.kernel == "linear":
            self.coef_ = self.dual_coef_ @ self.support_vectors_
        elif hasattr(self, "coef_"):
            del self.coef_

    def _decision(self, X):
        if self.kernel == "linear":
            return X @ self.coef_ + self.intercept_
        return self._kernel(X, self.support_vectors_) @ self.dual_coef_ + self.intercept_

    @classmethod
    def from_support_vectors(cls, support_vectors, dual_coef, intercept,
                             kernel="gaussian", C=1.0, gamma=1.0, **kw):
        """Rebuild a fitted model from its decision-function parts."""
        model = cls(kernel=kernel, C=C, gamma=gamma, **kw)
        model.support_vectors_ = np.asarray(support_vectors, dtype=float)
        model.dual_coef_ = np.asarray(dual_coef, dtype=float)
        model.intercept_ = float(intercept)
        model.classes_ = np.array([0, 1])
        model.n_features_in_ = model.support_vectors_.shape[1]
        model.converged_ = True
        model._set_linear_weights()
        return model
