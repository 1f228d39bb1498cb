"""Recorded trials and labelled datasets."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from .features import N_FEATURES, N_PINS, PinFrame


@dataclass
class SensorStream:
    """All frames of one sensor in a run: ``t_ms`` (n,) and ``pins`` (n, 30, 2)."""

    sensor_id: int
    t_ms: np.ndarray
    pins: np.ndarray

    def __post_init__(self):
        self.t_ms = np.asarray(self.t_ms, dtype=np.int64)
        self.pins = np.asarray(self.pins, dtype=float).reshape(-1, N_PINS, 2)
        if self.t_ms.shape[0] != self.pins.shape[0]:
            raise ValueError("timestamp and pin counts differ")
        if np.any(np.diff(self.t_ms) <= 0):
            raise ValueError(f"sensor {self.sensor_id}: timestamps must strictly increase")

    def __len__(self):
        return int(self.t_ms.shape[0])

    def frame(self, k: int) -> PinFrame:
        return PinFrame(int(self.t_ms[k]), self.sensor_id, self.pins[k])

    def frames(self):
        for k in range(len(self)):
            yield self.frame(k)


@dataclass
class LabeledRun:
    run_id: str
    streams: Dict[int, SensorStream]
    height_t_ms: np.ndarray
    height_mm: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.height_t_ms = np.asarray(self.height_t_ms, dtype=np.int64)
        self.height_mm = np.asarray(self.height_mm, dtype=float)

    @property
    def sensor_ids(self) -> List[int]:
        return sorted(self.streams)

    @property
    def tag(self) -> Optional[str]:
        return self.metadata.get("object")

    def iter_frames(self):
        """All frames in global time order, ties broken by sensor id."""
        order = []
        for sid in self.sensor_ids:
            s = self.streams[sid]
            order.extend((int(t), sid, k) for k, t in enumerate(s.t_ms))
        order.sort()
        for t, sid, k in order:
            yield self.streams[sid].frame(k)


@dataclass
class Dataset:
    """Feature rows with labels and (run, sensor, frame) provenance."""

    X: np.ndarray
    y: np.ndarray
    run_ids: np.ndarray
    sensor_ids: np.ndarray
    frame_index: np.ndarray
    flags: dict = field(default_factory=dict)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float).reshape(-1, N_FEATURES)
        self.y = np.asarray(self.y, dtype=int)
        self.run_ids = np.asarray(self.run_ids, dtype=object)
        self.sensor_ids = np.asarray(self.sensor_ids, dtype=int)
        self.frame_index = np.asarray(self.frame_index, dtype=int)
        n = self.X.shape[0]
        for name in ("y", "run_ids", "sensor_ids", "frame_index"):
            if getattr(self, name).shape[0] != n:
                raise ValueError(f"{name} length differs from X")

    def __len__(self):
        return int(self.X.shape[0])

    @property
    def n_static(self) -> int:
        return int(np.sum(self.y == 0))

    @property
    def n_slip(self) -> int:
        return int(np.sum(self.y == 1))

    def subset(self, mask_or_index) -> "Dataset":
        idx = np.asarray(mask_or_index)
        return Dataset(self.X[idx], self.y[idx], self.run_ids[idx],
                       self.sensor_ids[idx], self.frame_index[idx], dict(self.flags))

    def for_sensor(self, sensor_id: int) -> "Dataset":
        return self.subset(self.sensor_ids == sensor_id)

    @staticmethod
    def concat(parts: List["Dataset"]) -> "Dataset":
        if not parts:
            return Dataset(np.zeros((0, N_FEATURES)), [], [], [], [])
        flags = {}
        for p in parts:
            flags.update(p.flags)
        return Dataset(np.concatenate([p.X for p in parts]),
                       np.concatenate([p.y for p in parts]),
                       np.concatenate([p.run_ids for p in parts]),
                       np.concatenate([p.sensor_ids for p in parts]),
                       np.concatenate([p.frame_index for p in parts]),
                       flags)
