"""Generators of labelled tactile trials.

``RailTrial`` and ``GraspTrial`` are stepable so closed-loop experiments can
intervene; the ``gen_*`` functions run them open loop.
"""

from __future__ import annotations

from dataclasses import asdict
from typing import List, Optional, Sequence

import numpy as np

from ..data import LabeledRun, SensorStream
from ..features import PinFrame
from .physics import GraspState, PhysicsParams
from .rig import FRAME_MS, HandRig
from .tactile import SensorNoiseProfile

#: drop below the starting height (mm) recorded as the labelled onset; it
#: matches the default labelling threshold
ONSET_DROP_MM = 2.0
RETRACT_GRIP_PER_MM = 0.005
RAIL_HEIGHT_MM = 300.0
TABLE_HEIGHT_MM = 150.0


def rig_to_run(rig: HandRig, run_id: str, metadata: dict, z0: float) -> LabeledRun:
    streams = {}
    for sid, frames in rig.frames.items():
        if frames:
            streams[sid] = SensorStream(sid, [f.timestamp for f in frames],
                                        np.stack([f.pins for f in frames]))
    t = np.array([h[0] for h in rig.height_log], dtype=np.int64)
    z = np.array([h[1] for h in rig.height_log])
    meta = dict(metadata)
    below = np.flatnonzero(z0 - z > ONSET_DROP_MM)
    meta["onset_index"] = int(below[0]) if below.size else None
    meta["onset_ms"] = int(t[below[0]]) if below.size else None
    meta["motion_onset_ms"] = rig.motion_onset_ms
    meta["gross_onset_ms"] = list(rig.gross_onset_ms)
    meta["hand_mm"] = [h[1] for h in rig.hand_log]
    meta["slip_speed_mm_s"] = list(rig.speed_log)
    return LabeledRun(run_id, streams, t, z, meta)


def _add_random_bursts(rig: HandRig, sensor: int, rng: np.random.Generator,
                       rate_hz: float, t0_ms: float, t1_ms: float):
    """Poisson-timed transients between ``t0_ms`` and ``t1_ms``."""
    if rate_hz <= 0 or t1_ms <= t0_ms:
        return
    n = rng.poisson(rate_hz * (t1_ms - t0_ms) / 1000.0)
    for t in np.sort(rng.uniform(t0_ms, t1_ms, n)):
        rig.add_burst(sensor, float(t), float(rng.uniform(0.6, 1.4)))


def breakaway_grip(mass_g: float, params: PhysicsParams, share: float = 1.0) -> float:
    """Grip at which static friction exactly balances the weight."""
    return params.g_cont + mass_g * 1e-3 * 9.81 / (params.mu * params.grip_gain * share)


class RailTrial:
    """A single fingertip pins an object against a rail, then retracts.

    The retraction lowers the grip at ``retract_speed * 0.005`` grip units per
    second. :meth:`respond` switches from retracting to squeezing by
    ``catch_step`` grip units, the rail's catch action.
    """

    def __init__(self, noise: SensorNoiseProfile = SensorNoiseProfile(),
                 retract_speed: float = 1.0, seed: int = 0,
                 params: PhysicsParams = PhysicsParams(),
                 mass_g: Optional[float] = None, static_s: Optional[float] = None,
                 drop_mm: float = 60.0):
        if not 0.1 <= retract_speed <= 5.0:
            raise ValueError("retract speed must be within [0.1, 5.0] mm/s")
        rng = np.random.default_rng(seed)
        self.seed = seed
        self.noise = noise
        self.retract_speed = float(retract_speed)
        self.mass_g = float(rng.uniform(80.0, 120.0) if mass_g is None else mass_g)
        self.static_s = float(rng.uniform(1.0, 2.0) if static_s is None else static_s)
        self.rate = retract_speed * RETRACT_GRIP_PER_MM
        self.g0 = breakaway_grip(self.mass_g, params) + self.rate * self.static_s
        self.drop_mm = drop_mm
        self.z0 = RAIL_HEIGHT_MM
        state = GraspState(0.0, self.g0, (1.0,), self.mass_g, self.z0, 0.0, self.z0, 0.0,
                           params=params)
        self.rig = HandRig(state, [noise], rng, slip_directions=[np.pi / 2])
        if noise.transients_enabled:
            # initial contact settling, then random knocks while the object is held
            self.rig.add_burst(0, rng.uniform(5, 15) * FRAME_MS, rng.uniform(0.6, 1.4))
            _add_random_bursts(self.rig, 0, rng, noise.transient_rate, 300.0,
                               self.static_s * 1000.0)
        self.t_end = int((self.static_s + 4.0) * 1000)
        self.command = self.g0
        self.caught_command: Optional[float] = None

    @property
    def drop(self) -> float:
        return self.z0 - self.rig.state.obj_z

    @property
    def dropped(self) -> bool:
        return self.drop > self.drop_mm

    @property
    def done(self) -> bool:
        return self.dropped or self.rig.t_ms >= self.t_end

    def respond(self, catch_step: float = 0.05):
        if self.caught_command is None:
            self.caught_command = min(1.0, self.rig.state.grip + catch_step)

    def step(self) -> List[PinFrame]:
        if self.caught_command is None:
            self.command = max(0.0, self.command - self.rate * 1e-3)
        else:
            self.command = self.caught_command
        return self.rig.step(self.command)

    def to_run(self, run_id: Optional[str] = None) -> LabeledRun:
        meta = {"kind": "rail", "object": "rail-block", "grasp": "rail", "seed": self.seed,
                "retract_speed": self.retract_speed, "mass_g": self.mass_g,
                "static_s": self.static_s, "profile": asdict(self.noise)}
        return rig_to_run(self.rig, run_id or f"rail-{self.seed}", meta, self.z0)


def gen_single_finger_run(noise: SensorNoiseProfile = SensorNoiseProfile(),
                          retract_speed: float = 1.0, seed: int = 0,
                          params: PhysicsParams = PhysicsParams(),
                          mass_g: Optional[float] = None, static_s: Optional[float] = None,
                          drop_mm: float = 60.0, run_id: Optional[str] = None) -> LabeledRun:
    """Open-loop rail trial; ends once the object has fallen ``drop_mm``."""
    trial = RailTrial(noise, retract_speed, seed, params, mass_g, static_s, drop_mm)
    while not trial.done:
        trial.step()
    return trial.to_run(run_id)


class GraspTrial:
    """Several fingertips close on an object resting on a table.

    Sensor ``i`` carries ``shares[i]`` of the normal load; an unloaded sensor
    sees jitter only. After :meth:`close_and_hold` the table is removed and the
    caller drives the grip.
    """

    def __init__(self, noise: Sequence[SensorNoiseProfile] | SensorNoiseProfile = SensorNoiseProfile(),
                 shares: Sequence[float] = (0.5, 0.25, 0.25), seed: int = 0,
                 params: PhysicsParams = PhysicsParams(), mass_g: Optional[float] = None,
                 object_name: str = "object", hold_s: Optional[float] = None,
                 margin: Optional[float] = None, drop_mm: float = 60.0):
        shares = tuple(float(s) for s in shares)
        if abs(sum(shares) - 1.0) > 1e-9 or min(shares) < 0:
            raise ValueError("shares must be non-negative and sum to 1")
        if isinstance(noise, SensorNoiseProfile):
            noise = [noise] * len(shares)
        if len(noise) != len(shares):
            raise ValueError("one noise profile per sensor required")
        rng = np.random.default_rng(seed)
        self.rng = rng
        self.seed = seed
        self.noise = list(noise)
        self.shares = shares
        self.params = params
        self.object_name = object_name
        self.mass_g = float(rng.uniform(100.0, 400.0) if mass_g is None else mass_g)
        self.hold_s = float(rng.uniform(0.5, 1.0) if hold_s is None else hold_s)
        margin = float(rng.uniform(0.03, 0.06) if margin is None else margin)
        self.g_hold = breakaway_grip(self.mass_g, params) + margin
        self.z0 = TABLE_HEIGHT_MM
        self.drop_mm = drop_mm
        state = GraspState(0.0, params.g_cont - 0.01, shares, self.mass_g, self.z0, 0.0,
                           self.z0, 0.0, support_z=self.z0, params=params)
        self.rig = HandRig(state, self.noise, rng)
        t_close = 1000.0 * (self.g_hold - state.grip) / params.grip_rate
        for i, sh in enumerate(shares):
            if sh > 0 and self.noise[i].transients_enabled:
                _add_random_bursts(self.rig, i, rng, self.noise[i].transient_rate,
                                   t_close, t_close + self.hold_s * 1000.0)

    @property
    def drop(self) -> float:
        return self.z0 - self.rig.state.obj_z

    @property
    def dropped(self) -> bool:
        return self.drop > self.drop_mm

    def close_and_hold(self):
        while self.rig.state.grip < self.g_hold - 1e-9:
            self.rig.step(self.g_hold)
        t_hold_end = self.rig.t_ms + int(self.hold_s * 1000)
        while self.rig.t_ms < t_hold_end:
            self.rig.step(self.g_hold)
        self.rig.set_state(support_z=None)

    def to_run(self, run_id: Optional[str] = None, **extra) -> LabeledRun:
        meta = {"kind": "grasp", "object": self.object_name, "grasp": "pinch",
                "seed": self.seed, "shares": list(self.shares), "mass_g": self.mass_g,
                "profile": asdict(self.noise[0]), **extra}
        return rig_to_run(self.rig, run_id or f"grasp-{self.seed}", meta, self.z0)


def gen_grasp_run(noise: Sequence[SensorNoiseProfile] | SensorNoiseProfile = SensorNoiseProfile(),
                  shares: Sequence[float] = (0.5, 0.25, 0.25),
                  release_rate: float = 0.001, seed: int = 0,
                  params: PhysicsParams = PhysicsParams(), mass_g: Optional[float] = None,
                  object_name: str = "object", hold_s: Optional[float] = None,
                  drop_mm: float = 60.0, max_release_s: float = 3.0,
                  run_id: Optional[str] = None) -> LabeledRun:
    """Whole-hand trial: close on a supported object, hold, then open slowly.

    ``release_rate`` is the grip decrement per frame (1/60 s).
    """
    if release_rate < 0:
        raise ValueError("release rate must be >= 0")
    trial = GraspTrial(noise, shares, seed, params, mass_g, object_name, hold_s,
                       drop_mm=drop_mm)
    trial.close_and_hold()
    grip = trial.g_hold
    per_ms = release_rate * 60.0 / 1000.0
    t_end = trial.rig.t_ms + int(max_release_s * 1000)
    while trial.rig.t_ms < t_end and not trial.dropped:
        grip = max(0.0, grip - per_ms)
        trial.rig.step(grip)
    return trial.to_run(run_id, release_rate=release_rate)
