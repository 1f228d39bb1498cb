from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from ..features import FEATURE_LAYOUT

STATIC = 0
SLIP = 1


class TrainingError(ValueError):
    """Training data cannot produce a model (e.g. a single class)."""


class NumericError(ArithmeticError):
    """Optimisation produced a non-finite value."""


@dataclass(frozen=True)
class Prediction:
    label: int
    score: float

    @property
    def is_slip(self) -> bool:
        return self.label == SLIP


def label_from_score(score):
    """Ties at exactly zero are slip: a false alarm is cheaper than a drop."""
    return (np.asarray(score) >= 0.0).astype(int)


class SlipClassifier(ClassifierMixin, BaseEstimator):
    """Shared decision interface: ``label = slip <=> score >= 0``.

    Subclasses implement ``_fit`` and ``_decision``; both receive validated
    float arrays.
    """

    kind = "base"

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=float)
        y = np.asarray(y).astype(int)
        classes = np.unique(y)
        if not np.array_equal(classes, [STATIC, SLIP]):
            raise TrainingError(
                f"need both static (0) and slip (1) samples, got classes {classes.tolist()}")
        self.classes_ = np.array([STATIC, SLIP])
        self.n_features_in_ = X.shape[1]
        self.feature_layout_ = FEATURE_LAYOUT
        self._fit(X, y)
        return self

    def _check_input(self, X):
        check_is_fitted(self)
        X = check_array(np.atleast_2d(X), dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"expected {self.n_features_in_} features, got {X.shape[1]}")
        return X

    def decision_function(self, X):
        return self._decision(self._check_input(X))

    def predict(self, X):
        return label_from_score(self.decision_function(X))

    def classify(self, x) -> Prediction:
        """Single-sample decision, the form used by the online detector."""
        score = float(self.decision_function(x)[0])
        return Prediction(int(score >= 0.0), score)

    def _fit(self, X, y):
        raise NotImplementedError

    def _decision(self, X):
        raise NotImplementedError
