"""Class-balanced scoring for imbalanced slip/static data."""

from __future__ import annotations

import numpy as np


def _f1(tp: int, fp: int, fn: int) -> float:
    # 0/0 -> 0 at every stage
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    return 2 * p * r / (p + r) if p + r else 0.0


def per_class_f1(predictions, labels) -> tuple[float, float]:
    """F1 of the static class and of the slip class, in that order."""
    pred = np.asarray(predictions).astype(int).ravel()
    true = np.asarray(labels).astype(int).ravel()
    if pred.shape != true.shape:
        raise ValueError(f"length mismatch: {pred.shape[0]} vs {true.shape[0]}")
    if pred.size == 0:
        raise ValueError("macro_f1 needs at least one sample")
    out = []
    for c in (0, 1):
        tp = int(np.sum((pred == c) & (true == c)))
        fp = int(np.sum((pred == c) & (true != c)))
        fn = int(np.sum((pred != c) & (true == c)))
        out.append(_f1(tp, fp, fn))
    return out[0], out[1]


def macro_f1(predictions, labels) -> float:
    """Unweighted mean of the static-class and slip-class F1 scores."""
    f_static, f_slip = per_class_f1(predictions, labels)
    return (f_static + f_slip) / 2.0
