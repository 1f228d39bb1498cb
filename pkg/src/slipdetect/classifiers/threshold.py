from __future__ import annotations

import numpy as np

from ..features import N_PINS, mean_velocity_norm
from .base import Prediction, SlipClassifier, TrainingError, label_from_score
from ..metrics import macro_f1


def threshold_classify(dxy, threshold: float) -> Prediction:
    """Classify raw (dx, dy) pin velocities by the norm of their mean vector."""
    dxy = np.asarray(dxy, dtype=float)
    if dxy.shape != (N_PINS, 2):
        raise ValueError(f"expected ({N_PINS}, 2) velocities, got {dxy.shape}")
    v = float(np.hypot(dxy[:, 0].mean(), dxy[:, 1].mean()))
    score = v - threshold
    return Prediction(int(score >= 0.0), score)


class ThresholdSlipClassifier(SlipClassifier):
    """Slip iff the mean pin velocity vector is at least ``threshold_`` long.

    Parameters
    ----------
    n_candidates : int
        Number of evenly spaced thresholds tried between the static-class and
        slip-class mean of the velocity norm. The candidate with the highest
        training macro-F1 wins; ties go to the lowest threshold.
    threshold : float or None
        Fixed threshold. When given, ``fit`` skips the search.
    """

    kind = "threshold"

    def __init__(self, n_candidates: int = 10, threshold=None):
        self.n_candidates = n_candidates
        self.threshold = threshold

    def _fit(self, X, y):
        if self.threshold is not None:
            if self.threshold <= 0:
                raise ValueError("threshold must be > 0")
            self.threshold_ = float(self.threshold)
            self.candidates_ = np.array([self.threshold_])
            self.candidate_scores_ = np.array([np.nan])
            return
        if self.n_candidates < 2:
            raise ValueError("n_candidates must be >= 2")
        v = mean_velocity_norm(X)
        lo, hi = sorted((v[y == 0].mean(), v[y == 1].mean()))
        if hi <= 0.0:
            raise TrainingError("all velocity norms are zero")
        candidates = np.linspace(lo, hi, self.n_candidates)
        candidates = candidates[candidates > 0.0]
        scores = np.array([macro_f1(label_from_score(v - t), y) for t in candidates])
        self.candidates_ = candidates
        self.candidate_scores_ = scores
        self.threshold_ = float(candidates[int(np.argmax(scores))])

    def _decision(self, X):
        return mean_velocity_norm(X) - self.threshold_
