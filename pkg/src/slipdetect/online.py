"""Streaming per-sensor slip classification with multi-sensor fusion."""

from __future__ import annotations

import json
import re
import threading
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Union

import numpy as np

from .classifiers import SlipClassifier
from .data import LabeledRun
from .features import FrameError, PinFrame, featurize


class MonotonicTimeError(FrameError):
    """A frame is not newer than the sensor's previous frame."""


class ConfigurationError(ValueError):
    pass


_STRATEGY_RE = re.compile(r"^(\d+)Fr(\d+)Sen$")


@dataclass(frozen=True)
class StrategyConfig:
    """Fire when ``n_sensors`` sensors each report ``n_frames`` consecutive slips.

    Contributing sensors must have decided within ``window_ms`` of the newest
    decision. After a trigger, further triggers wait ``refractory_ms``.
    """

    n_frames: int = 2
    n_sensors: int = 1
    window_ms: float = 50.0
    refractory_ms: float = 100.0
    reset_on_trigger: bool = True

    def __post_init__(self):
        if self.n_frames < 1 or self.n_sensors < 1:
            raise ConfigurationError("n_frames and n_sensors must be >= 1")
        if self.window_ms < 0 or self.refractory_ms < 0:
            raise ConfigurationError("window and refractory period must be >= 0")

    @property
    def name(self) -> str:
        return f"{self.n_frames}Fr{self.n_sensors}Sen"

    @classmethod
    def parse(cls, text: str, **kw) -> "StrategyConfig":
        m = _STRATEGY_RE.match(text.strip())
        if not m:
            raise ConfigurationError(f"strategy must look like '2Fr2Sen', got {text!r}")
        return cls(int(m.group(1)), int(m.group(2)), **kw)


@dataclass
class SensorRuntimeState:
    sensor_id: int
    last_frame: Optional[PinFrame] = None
    count: int = 0
    last_decision_ms: Optional[int] = None
    last_score: float = float("nan")
    # state before the latest decision, consulted when frames tie on timestamp
    prev_count: int = 0
    prev_decision_ms: Optional[int] = None
    prev_score: float = float("nan")

    def slipping(self, n_frames: int) -> bool:
        return self.count >= n_frames

    def active_at(self, now: int, n_frames: int, window_ms: float) -> Optional[float]:
        """Score backing a slipping flag visible at ``now``, or None.

        A sensor decided at ``now`` also counts if it was slipping just before,
        so frames sharing a timestamp fire the same way whatever their order.
        """
        if (self.count >= n_frames and self.last_decision_ms is not None
                and now - self.last_decision_ms <= window_ms):
            return self.last_score
        if (self.last_decision_ms == now and self.prev_count >= n_frames
                and self.prev_decision_ms is not None
                and now - self.prev_decision_ms <= window_ms):
            return self.prev_score
        return None


@dataclass(frozen=True)
class TriggerEvent:
    t_ms: int
    sensors: tuple
    scores: tuple


ModelSpec = Union[SlipClassifier, Mapping[int, SlipClassifier], Sequence[SlipClassifier]]


class SlipDetector:
    """Online fusion over asynchronous fingertip streams.

    ``model`` is either one shared classifier (global mode) or one classifier
    per sensor keyed by sensor id (local mode). Calls to :meth:`ingest` may
    come from several producer threads; state changes happen under one lock.
    """

    def __init__(self, model: ModelSpec, strategy: StrategyConfig = StrategyConfig(),
                 sensor_ids: Sequence[int] = (0, 1, 2), keep_log: bool = True):
        self.sensor_ids = tuple(int(s) for s in sensor_ids)
        if not self.sensor_ids:
            raise ConfigurationError("at least one sensor required")
        if strategy.n_sensors > len(self.sensor_ids):
            raise ConfigurationError(
                f"{strategy.name} needs {strategy.n_sensors} sensors, "
                f"only {len(self.sensor_ids)} attached")
        if isinstance(model, SlipClassifier):
            self.models = {s: model for s in self.sensor_ids}
            self.mode = "global"
        else:
            if not isinstance(model, Mapping):
                model = dict(enumerate(model))
            if sorted(model) != sorted(self.sensor_ids):
                raise ConfigurationError(
                    f"local mode needs one model per sensor {list(self.sensor_ids)}, "
                    f"got keys {sorted(model)}")
            self.models = dict(model)
            self.mode = "local"
        self.strategy = strategy
        self.keep_log = keep_log
        self._lock = threading.Lock()
        self.reset()

    def reset(self):
        """Clear counts, frames, refractory state and the decision log."""
        self.states: Dict[int, SensorRuntimeState] = {
            s: SensorRuntimeState(s) for s in self.sensor_ids}
        self.last_trigger_ms: Optional[int] = None
        self.triggers: List[TriggerEvent] = []
        self.log: List[dict] = []

    def counts(self) -> Dict[int, int]:
        return {s: st.count for s, st in self.states.items()}

    def _refractory(self, t_ms: int) -> bool:
        return (self.last_trigger_ms is not None
                and t_ms - self.last_trigger_ms < self.strategy.refractory_ms)

    def ingest(self, frame: PinFrame) -> Optional[TriggerEvent]:
        with self._lock:
            return self._ingest(frame)

    def _ingest(self, frame: PinFrame) -> Optional[TriggerEvent]:
        st = self.states.get(frame.sensor_id)
        if st is None:
            raise FrameError(f"unknown sensor {frame.sensor_id}")
        prev = st.last_frame
        if prev is not None and frame.timestamp <= prev.timestamp:
            raise MonotonicTimeError(
                f"sensor {frame.sensor_id}: t={frame.timestamp} after t={prev.timestamp}")
        st.last_frame = frame
        if prev is None:
            return None
        x = featurize(prev, frame).features
        pred = self.models[frame.sensor_id].classify(x)
        st.prev_count, st.prev_decision_ms, st.prev_score = (
            st.count, st.last_decision_ms, st.last_score)
        st.count = st.count + 1 if pred.label else 0
        if self.strategy.reset_on_trigger and self.last_trigger_ms == frame.timestamp:
            # decisions on the trigger tick do not start the next count
            st.count = 0
        st.last_decision_ms = frame.timestamp
        st.last_score = pred.score
        count = st.count
        event = self._check_trigger(frame.timestamp)
        if self.keep_log:
            self.log.append({"t_ms": frame.timestamp, "sensor": frame.sensor_id,
                             "label": int(pred.label), "score": float(pred.score),
                             "count": count, "trigger": event is not None})
        return event

    def _check_trigger(self, now: int) -> Optional[TriggerEvent]:
        s = self.strategy
        if self._refractory(now):
            return None
        active = []
        for sid in sorted(self.states):
            score = self.states[sid].active_at(now, s.n_frames, s.window_ms)
            if score is not None:
                active.append((sid, score))
        if len(active) < s.n_sensors:
            return None
        event = TriggerEvent(now, tuple(a[0] for a in active), tuple(a[1] for a in active))
        self.triggers.append(event)
        self.last_trigger_ms = now
        if s.reset_on_trigger:
            for st in self.states.values():
                st.count = st.prev_count = 0
        return event

    def write_log(self, path):
        with open(path, "w") as fh:
            for rec in self.log:
                fh.write(json.dumps(rec) + "\n")


def order_frames(frames):
    """Serialise frames from several producers: by timestamp, ties by sensor."""
    return sorted(frames, key=lambda f: (f.timestamp, f.sensor_id))


@dataclass
class StreamResult:
    triggers: List[TriggerEvent]
    onset_ms: Optional[int]
    outcome: str                     # "TP", "FP", "FN" or "TN"
    latency_ms: Optional[float]
    log: List[dict] = field(default_factory=list)

    @property
    def first_trigger_ms(self) -> Optional[int]:
        return self.triggers[0].t_ms if self.triggers else None


def classify_outcome(first_trigger_ms, onset_ms, deadline_ms=None):
    """Online bookkeeping: a trigger before onset is FP, after onset TP.

    Without any trigger up to ``deadline_ms`` a slipping run is FN.
    """
    if first_trigger_ms is not None and (deadline_ms is None or first_trigger_ms <= deadline_ms):
        if onset_ms is None or first_trigger_ms < onset_ms:
            return "FP", None
        return "TP", float(first_trigger_ms - onset_ms)
    return ("TN" if onset_ms is None else "FN"), None


def run_stream(detector: SlipDetector, run: LabeledRun,
               callback: Optional[Callable[[TriggerEvent], None]] = None,
               onset_ms: Optional[int] = "metadata", deadline_ms: Optional[int] = None,
               stop_on_trigger: bool = False) -> StreamResult:
    """Replay ``run`` through ``detector`` in serialised time order.

    The ground-truth onset defaults to the run's labelled onset.
    """
    if not run.streams:
        raise ValueError("run has no sensor streams")
    if onset_ms == "metadata":
        onset_ms = run.metadata.get("onset_ms")
    detector.reset()
    for frame in run.iter_frames():
        if frame.sensor_id not in detector.states:
            continue
        event = detector.ingest(frame)
        if event is not None:
            if callback is not None:
                callback(event)
            if stop_on_trigger:
                break
    first = detector.triggers[0].t_ms if detector.triggers else None
    outcome, latency = classify_outcome(first, onset_ms, deadline_ms)
    return StreamResult(list(detector.triggers), onset_ms, outcome, latency, list(detector.log))


def first_trigger_time(model: ModelSpec, run: LabeledRun, strategy: StrategyConfig) -> float:
    """First trigger timestamp of ``strategy`` on ``run``, ``inf`` if none."""
    det = SlipDetector(model, strategy, sensor_ids=run.sensor_ids, keep_log=False)
    res = run_stream(det, run, stop_on_trigger=True)
    return float(res.first_trigger_ms) if res.triggers else float(np.inf)
