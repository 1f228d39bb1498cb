"""Offline protocol: labelling, class rebalancing, run splits, sweeps and search."""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .classifiers import (LogisticSlipClassifier, SMOSlipClassifier, SlipClassifier,
                          ThresholdSlipClassifier)
from .data import Dataset, LabeledRun
from .features import N_FEATURES, stream_features
from .metrics import macro_f1

BASELINE_SAMPLES = 10
DEFAULT_FALL_THRESHOLD_MM = 2.0
MAX_N_SLIP = 15

CLASSIFIER_KINDS = ("threshold", "logreg", "svm")
DEFAULT_SPACES = {
    "logreg": {"C": (1e-2, 1e2)},
    "svm": {"gamma": (1e-2, 1e2), "C": (1e-2, 1e2)},
}


def make_classifier(kind: str, **params) -> SlipClassifier:
    if kind == "threshold":
        return ThresholdSlipClassifier(**params)
    if kind == "logreg":
        return LogisticSlipClassifier(**params)
    if kind in ("svm", "svm-linear"):
        if kind == "svm-linear":
            params.setdefault("kernel", "linear")
        return SMOSlipClassifier(**params)
    raise ValueError(f"unknown classifier kind {kind!r}; expected one of {CLASSIFIER_KINDS}")


# ---------------------------------------------------------------- labelling

def detect_onset(height_t_ms, height_mm, fall_threshold_mm=DEFAULT_FALL_THRESHOLD_MM):
    """Timestamp of the first height sample below the resting baseline, or None.

    The baseline is the median of the first ten samples.
    """
    z = np.asarray(height_mm, dtype=float)
    if z.size == 0:
        raise ValueError("height trace is empty")
    baseline = float(np.median(z[:BASELINE_SAMPLES]))
    below = np.flatnonzero(z < baseline - fall_threshold_mm)
    if below.size == 0:
        return None
    return int(np.asarray(height_t_ms)[below[0]])


def _check_labelling(n_slip, fall_threshold_mm):
    if not 1 <= int(n_slip) <= MAX_N_SLIP:
        raise ValueError(f"n_slip must be in [1, {MAX_N_SLIP}], got {n_slip}")
    if fall_threshold_mm <= 0:
        raise ValueError("fall threshold must be > 0")


def label_masks(t_ms: np.ndarray, onset_ms: Optional[int], n_slip: int):
    """Static and slip row masks for a stream's feature rows.

    Row ``j`` is the velocity ending at frame ``j + 1`` and takes that frame's
    timestamp. Frames before onset are static; the first ``n_slip`` at or
    after onset are slip; later frames are dropped.
    """
    t = np.asarray(t_ms)[1:]
    if onset_ms is None:
        return np.ones(t.shape, bool), np.zeros(t.shape, bool)
    static = t < onset_ms
    after = np.flatnonzero(~static)
    slip = np.zeros(t.shape, bool)
    slip[after[:n_slip]] = True
    return static, slip


class RunFeatureCache:
    """Per-run, per-sensor feature matrices, computed once."""

    def __init__(self):
        self._store: Dict[Tuple[str, int], np.ndarray] = {}

    def get(self, run: LabeledRun, sensor_id: int) -> np.ndarray:
        key = (run.run_id, sensor_id)
        if key not in self._store:
            self._store[key] = stream_features(run.streams[sensor_id].pins)
        return self._store[key]


def label_run(run: LabeledRun, n_slip: int = 13,
              fall_threshold_mm: float = DEFAULT_FALL_THRESHOLD_MM,
              sensors: Optional[Iterable[int]] = None,
              cache: Optional[RunFeatureCache] = None) -> Dataset:
    """Labelled feature rows of one run (all sensors unless ``sensors`` given).

    A run whose object never falls yields static rows only and is flagged in
    ``Dataset.flags["no_onset"]``.
    """
    _check_labelling(n_slip, fall_threshold_mm)
    onset = detect_onset(run.height_t_ms, run.height_mm, fall_threshold_mm)
    cache = cache or RunFeatureCache()
    parts = []
    for sid in (run.sensor_ids if sensors is None else sensors):
        stream = run.streams[sid]
        if len(stream) < 2:
            continue
        F = cache.get(run, sid)
        static, slip = label_masks(stream.t_ms, onset, n_slip)
        keep = static | slip
        idx = np.flatnonzero(keep)
        parts.append(Dataset(F[idx], slip[idx].astype(int), [run.run_id] * idx.size,
                             [sid] * idx.size, idx + 1))
    ds = Dataset.concat(parts)
    ds.flags = {"no_onset": [run.run_id]} if onset is None else {}
    return ds


def build_dataset(runs: Sequence[LabeledRun], n_slip: int = 13,
                  fall_threshold_mm: float = DEFAULT_FALL_THRESHOLD_MM,
                  sensors: Optional[Iterable[int]] = None,
                  cache: Optional[RunFeatureCache] = None) -> Dataset:
    cache = cache or RunFeatureCache()
    parts = [label_run(r, n_slip, fall_threshold_mm, sensors, cache) for r in runs]
    no_onset = [rid for p in parts for rid in p.flags.get("no_onset", [])]
    ds = Dataset.concat(parts)
    ds.flags = {"no_onset": no_onset} if no_onset else {}
    return ds


def downsample_static(ds: Dataset, d: float, seed: int = 0) -> Dataset:
    """Keep ``floor(d * N0)`` static rows at random and every slip row."""
    if not 0.0 < d <= 1.0:
        raise ValueError(f"d must be in (0, 1], got {d}")
    static = np.flatnonzero(ds.y == 0)
    # the small epsilon keeps 0.3 * 10 from flooring to 2
    n_keep = int(math.floor(d * static.size + 1e-9))
    rng = np.random.default_rng(seed)
    chosen = rng.choice(static, size=n_keep, replace=False) if n_keep < static.size else static
    mask = ds.y == 1
    mask[chosen] = True
    return ds.subset(np.flatnonzero(mask))


def split_runs(runs: Sequence[LabeledRun], seed: int = 0):
    """Half the runs for training and half for testing, balanced per object tag.

    Odd groups send their spare run to whichever side is currently smaller.
    Both halves keep the input order.
    """
    if len(runs) < 2:
        raise ValueError("need at least 2 runs to split")
    rng = np.random.default_rng(seed)
    groups: Dict[object, List[int]] = {}
    for i, r in enumerate(runs):
        groups.setdefault(r.tag, []).append(i)
    train, test = [], []
    spares = []
    for tag in sorted(groups, key=str):
        idx = list(rng.permutation(groups[tag]))
        half = len(idx) // 2
        train += idx[:half]
        test += idx[half:2 * half]
        if len(idx) % 2:
            spares.append(idx[-1])
    for i in spares:
        (train if len(train) <= len(test) else test).append(i)
    return [runs[i] for i in sorted(train)], [runs[i] for i in sorted(test)]


def evaluate(model: SlipClassifier, ds: Dataset) -> float:
    return macro_f1(model.predict(ds.X), ds.y)


# ---------------------------------------------------------------- sweep

@dataclass
class SweepCell:
    d: float
    n_slip: int
    macro_f1: float = float("nan")
    converged: bool = False
    n_train: int = 0
    error: Optional[str] = None


@dataclass
class SweepReport:
    classifier: str
    cells: Dict[Tuple[float, int], SweepCell] = field(default_factory=dict)

    @property
    def best(self) -> Optional[SweepCell]:
        ok = [c for c in self.cells.values() if c.error is None]
        if not ok:
            return None
        return max(sorted(ok, key=lambda c: (c.d, c.n_slip)), key=lambda c: c.macro_f1)

    def rows(self) -> List[SweepCell]:
        return [self.cells[k] for k in sorted(self.cells)]

    def spread(self) -> float:
        vals = [c.macro_f1 for c in self.rows() if c.error is None]
        return max(vals) - min(vals) if vals else float("nan")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["classifier", "d", "n_slip", "macro_f1", "converged"])
        for c in self.rows():
            f1 = "" if c.error else repr(float(c.macro_f1))
            w.writerow([self.classifier, repr(float(c.d)), c.n_slip, f1, str(c.converged).lower()])
        return buf.getvalue()


def _converged(model) -> bool:
    return bool(getattr(model, "converged_", True))


def sweep(runs: Sequence[LabeledRun], kind: str, d_values: Sequence[float],
          n_slip_values: Sequence[int], params: Optional[dict] = None, seed: int = 0,
          fall_threshold_mm: float = DEFAULT_FALL_THRESHOLD_MM,
          split: Optional[tuple] = None, sensors=None,
          cache: Optional[RunFeatureCache] = None) -> SweepReport:
    """Train and score ``kind`` over the ``d x n_slip`` grid.

    Training rows are downsampled per cell; the test split is always scored in
    full. A failing cell records its error instead of aborting the sweep.
    """
    if not len(d_values) or not len(n_slip_values):
        raise ValueError("sweep grids must be non-empty")
    params = dict(params or {})
    train_runs, test_runs = split if split is not None else split_runs(runs, seed)
    cache = cache or RunFeatureCache()
    report = SweepReport(kind)
    for n_slip in sorted(set(int(n) for n in n_slip_values)):
        train_full = build_dataset(train_runs, n_slip, fall_threshold_mm, sensors, cache)
        test = build_dataset(test_runs, n_slip, fall_threshold_mm, sensors, cache)
        for d in sorted(set(float(x) for x in d_values)):
            cell = SweepCell(d, n_slip)
            try:
                train = downsample_static(train_full, d, seed)
                cell.n_train = len(train)
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", RuntimeWarning)
                    model = make_classifier(kind, **params).fit(train.X, train.y)
                cell.macro_f1 = evaluate(model, test)
                cell.converged = _converged(model)
            except (ValueError, ArithmeticError) as exc:
                cell.error = f"{type(exc).__name__}: {exc}"
            report.cells[(d, n_slip)] = cell
    return report


# ---------------------------------------------------------------- search

@dataclass
class SearchResult:
    params: dict
    score: float
    candidates: List[Tuple[dict, float]]


def _run_folds(runs: Sequence[LabeledRun], folds: int, rng) -> List[List[int]]:
    order = rng.permutation(len(runs))
    return [sorted(order[k::folds].tolist()) for k in range(folds)]


def cross_validate(runs: Sequence[LabeledRun], kind: str, params: dict, folds: int = 3,
                   seed: int = 0, d: float = 0.4, n_slip: int = 13,
                   fall_threshold_mm: float = DEFAULT_FALL_THRESHOLD_MM,
                   cache: Optional[RunFeatureCache] = None, sensors=None) -> float:
    """Mean macro-F1 over run-level folds; failed folds count as 0."""
    if folds < 2 or folds > len(runs):
        raise ValueError(f"folds must be in [2, {len(runs)}]")
    cache = cache or RunFeatureCache()
    rng = np.random.default_rng(seed)
    parts = _run_folds(runs, folds, rng)
    scores = []
    for k, held in enumerate(parts):
        held_set = set(held)
        tr = [r for i, r in enumerate(runs) if i not in held_set]
        te = [runs[i] for i in held]
        train = downsample_static(build_dataset(tr, n_slip, fall_threshold_mm, sensors, cache), d, seed)
        test = build_dataset(te, n_slip, fall_threshold_mm, sensors, cache)
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                model = make_classifier(kind, **params).fit(train.X, train.y)
            scores.append(evaluate(model, test))
        except (ValueError, ArithmeticError):
            scores.append(0.0)
    return float(np.mean(scores))


def sample_space(space: Dict[str, Tuple[float, float]], n: int, seed: int = 0) -> List[dict]:
    """``n`` log-uniform draws; parameter names are drawn in sorted order."""
    if not space:
        raise ValueError("search space is empty")
    for name, (lo, hi) in space.items():
        if not 0 < lo <= hi:
            raise ValueError(f"bad bounds for {name}: {(lo, hi)}")
    rng = np.random.default_rng(seed)
    names = sorted(space)
    out = []
    for _ in range(n):
        out.append({k: float(np.exp(rng.uniform(np.log(space[k][0]), np.log(space[k][1]))))
                    for k in names})
    return out


def hyperparam_search(train_runs: Sequence[LabeledRun], kind: str,
                      space: Optional[Dict[str, Tuple[float, float]]] = None,
                      budget: int = 30, folds: int = 3, seed: int = 0,
                      d: float = 0.4, n_slip: int = 13, fixed: Optional[dict] = None,
                      fall_threshold_mm: float = DEFAULT_FALL_THRESHOLD_MM,
                      cache: Optional[RunFeatureCache] = None) -> SearchResult:
    """Seeded random search scored by run-level cross-validated macro-F1.

    The first candidate with the highest score wins.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    if space is None:
        space = DEFAULT_SPACES.get(kind, {})
    cands = sample_space(space, budget, seed)
    cache = cache or RunFeatureCache()
    scored = []
    for p in cands:
        full = {**(fixed or {}), **p}
        scored.append((p, cross_validate(train_runs, kind, full, folds, seed, d, n_slip,
                                         fall_threshold_mm, cache)))
    best = max(range(len(scored)), key=lambda i: (scored[i][1], -i))
    return SearchResult(dict(scored[best][0]), scored[best][1], scored)


def train_model(runs: Sequence[LabeledRun], kind: str, params: Optional[dict] = None,
                d: float = 0.4, n_slip: int = 13, seed: int = 0,
                fall_threshold_mm: float = DEFAULT_FALL_THRESHOLD_MM, sensors=None,
                cache: Optional[RunFeatureCache] = None):
    """Label, downsample and fit; returns ``(model, training dataset)``."""
    ds = downsample_static(build_dataset(runs, n_slip, fall_threshold_mm, sensors, cache), d, seed)
    model = make_classifier(kind, **(params or {})).fit(ds.X, ds.y)
    return model, ds


def empty_dataset() -> Dataset:
    return Dataset(np.zeros((0, N_FEATURES)), [], [], [], [])
