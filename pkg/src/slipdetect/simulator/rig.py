"""Millisecond physics loop that emits asynchronous 60 Hz tactile frames."""

from __future__ import annotations

from dataclasses import replace
from typing import Dict, List, Optional, Sequence

import numpy as np

from ..features import PinFrame
from .physics import GraspState, step_grasp
from .tactile import FingertipModel, SensorNoiseProfile

FRAME_RATE_HZ = 60.0
FRAME_MS = 1000.0 / FRAME_RATE_HZ
TIMESTAMP_JITTER_MS = 2
DT_S = 1e-3


class HandRig:
    """Couples :func:`step_grasp` to one fingertip model per sensor.

    Each sensor runs its own frame clock with a random phase and +/-2 ms
    timestamp jitter. ``step`` advances 1 ms and returns the frames that
    became available during that millisecond.
    """

    def __init__(self, state: GraspState, profiles: Sequence[SensorNoiseProfile],
                 rng: np.random.Generator, slip_directions: Optional[Sequence[float]] = None):
        self.state = state
        self.rng = rng
        n = len(state.shares)
        if len(profiles) != n:
            raise ValueError("one noise profile per sensor required")
        shares = np.asarray(state.shares, dtype=float)
        top = shares.max() if shares.max() > 0 else 1.0
        self.weights = shares / top
        # lightly loaded fingers let go first
        self.stick_limits = state.params.stick_limit_mm * (0.5 + 0.5 * self.weights)
        if slip_directions is None:
            slip_directions = rng.uniform(-np.pi, np.pi, n)
        self.tips: List[FingertipModel] = [
            FingertipModel(profiles[i], rng, slip_direction=float(slip_directions[i]),
                           shear_direction=float(rng.uniform(-np.pi, np.pi)))
            for i in range(n)]
        self.t_ms = 0
        self._phase = rng.integers(0, int(FRAME_MS), n)
        self._k = np.zeros(n, dtype=int)
        self._next = np.array([self._due(i) for i in range(n)])
        self._last_ms = np.full(n, -1)
        self.frames: Dict[int, List[PinFrame]] = {i: [] for i in range(n)}
        self.height_log: List[tuple] = []
        self.hand_log: List[tuple] = []
        self.speed_log: List[float] = []
        self.motion_onset_ms: Optional[int] = None
        self.gross_onset_ms: List[Optional[int]] = [None] * n

    def _due(self, i) -> int:
        nominal = self._phase[i] + self._k[i] * FRAME_MS
        jitter = int(self.rng.integers(-TIMESTAMP_JITTER_MS, TIMESTAMP_JITTER_MS + 1))
        t = int(round(nominal)) + jitter
        if self._k[i] > 0:
            t = max(t, int(self._last_ms[i]) + 1)
        return max(t, 0)

    @property
    def n_sensors(self) -> int:
        return len(self.tips)

    def in_gross_slip(self, i: int) -> bool:
        s = self.state
        return (not s.stuck) and s.contact[i] and s.slip_disp >= self.stick_limits[i]

    def add_burst(self, sensor: int, t_ms: float, scale: float = 1.0):
        self.tips[sensor].add_burst(t_ms, scale)

    def step(self, grip_command: float, hand_velocity: Optional[float] = None) -> List[PinFrame]:
        prev = self.state
        self.state = cur = step_grasp(prev, DT_S, grip_command, hand_velocity)
        self.t_ms += 1
        if not cur.stuck and self.motion_onset_ms is None:
            self.motion_onset_ms = self.t_ms
        loads = cur.normal_forces()
        gross = [self.in_gross_slip(i) for i in range(self.n_sensors)]
        for i, g in enumerate(gross):
            if g and self.gross_onset_ms[i] is None:
                self.gross_onset_ms[i] = self.t_ms
        out = []
        for i in range(self.n_sensors):
            if self.t_ms < self._next[i]:
                continue
            # object speed relative to the fingertip, positive when sliding down
            speed = -cur.rel_v if gross[i] else 0.0
            pins = self.tips[i].frame(self.t_ms, float(loads[i]) if cur.contact[i] else 0.0,
                                      speed, gross[i], float(self.weights[i]))
            frame = PinFrame(self.t_ms, i, pins)
            self.frames[i].append(frame)
            out.append(frame)
            if i == 0:
                self.height_log.append((self.t_ms, float(cur.obj_z)))
                self.hand_log.append((self.t_ms, float(cur.hand_z)))
                self.speed_log.append(float(speed))
            self._last_ms[i] = self.t_ms
            self._k[i] += 1
            self._next[i] = self._due(i)
        return out

    def set_state(self, **changes):
        self.state = replace(self.state, **changes)
