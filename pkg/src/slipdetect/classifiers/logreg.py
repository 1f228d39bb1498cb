from __future__ import annotations

import numpy as np
from scipy.special import expit

from .base import NumericError, SlipClassifier


def logreg_loss(theta, X, y, C):
    """L2-penalised negative log-likelihood; ``theta[0]`` is the unpenalised bias."""
    z = theta[0] + X @ theta[1:]
    # log(1 + e^z) - y z, stable for both signs of z
    nll = np.sum(np.logaddexp(0.0, z) - y * z)
    return nll + 0.5 / C * np.dot(theta[1:], theta[1:])


def logreg_grad(theta, X, y, C):
    z = theta[0] + X @ theta[1:]
    r = expit(z) - y
    g = np.empty_like(theta)
    g[0] = r.sum()
    g[1:] = X.T @ r + theta[1:] / C
    return g


def logreg_predict(x, theta):
    """Return (score, probability) for one observation under ``theta``."""
    x = np.asarray(x, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if x.shape[-1] != theta.shape[0] - 1:
        raise ValueError(
            f"expected {theta.shape[0] - 1} features, got {x.shape[-1]}")
    score = theta[0] + x @ theta[1:]
    return score, expit(score)


def fit_logreg(X, y, C=1.0, max_iter=20000, tol=1e-6, step0=1.0,
               shrink=0.5, armijo=1e-4):
    """Full-batch gradient descent with backtracking from theta = 0.

    Returns (theta, converged, n_iter, losses). The loss sequence is
    non-increasing by construction of the Armijo test.
    """
    if C <= 0:
        raise ValueError("C must be > 0")
    theta = np.zeros(X.shape[1] + 1)
    loss = logreg_loss(theta, X, y, C)
    losses = [loss]
    step = step0
    converged = False
    for _ in range(max_iter):
        g = logreg_grad(theta, X, y, C)
        if not np.all(np.isfinite(g)):
            raise NumericError("non-finite gradient")
        if np.max(np.abs(g)) < tol:
            converged = True
            break
        gg = np.dot(g, g)
        step *= 2.0
        while True:
            cand = theta - step * g
            cand_loss = logreg_loss(cand, X, y, C)
            if cand_loss <= loss - armijo * step * gg:
                break
            step *= shrink
            if step < 1e-300:
                # no descent possible at machine precision
                return theta, False, len(losses) - 1, np.array(losses)
        if not np.isfinite(cand_loss):
            raise NumericError("non-finite loss")
        theta, loss = cand, cand_loss
        losses.append(loss)
    return theta, converged, len(losses) - 1, np.array(losses)


class LogisticSlipClassifier(SlipClassifier):
    """Logistic regression on the 60 pin-velocity features.

    Minimises ``||w||^2 / (2C) + sum(log-loss)`` so large ``C`` means weak
    regularisation. ``theta_`` holds the bias followed by the weights.
    """

    kind = "logreg"

    def __init__(self, C: float = 1.0, max_iter: int = 20000, tol: float = 1e-6):
        self.C = C
        self.max_iter = max_iter
        self.tol = tol

    def _fit(self, X, y):
        theta, converged, n_iter, losses = fit_logreg(
            X, y.astype(float), C=self.C, max_iter=self.max_iter, tol=self.tol)
        self.theta_ = theta
        self.converged_ = converged
        self.n_iter_ = n_iter
        self.loss_curve_ = losses

    @property
    def coef_(self):
        return self.theta_[1:][None, :]

    @property
    def intercept_(self):
        return self.theta_[:1]

    def _decision(self, X):
        return self.theta_[0] + X @ self.theta_[1:]

    def predict_proba(self, X):
        p = expit(self.decision_function(X))
        return np.column_stack([1.0 - p, p])
