"""Closed-loop experiments: a detector drives the simulated hand."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from ..classifiers import SlipClassifier
from ..data import LabeledRun
from ..features import pin_deformation
from ..online import SlipDetector, StrategyConfig, order_frames
from .generators import GraspTrial, RailTrial
from .physics import PhysicsError, PhysicsParams, find_g_min
from .tactile import SensorNoiseProfile

OUTCOMES = ("caught", "dropped", "false_positive", "lifted", "crushed-not-modeled")


@dataclass
class ScenarioResult:
    outcome: str
    slip_distance_mm: float
    trigger_ms: List[int] = field(default_factory=list)
    log: List[dict] = field(default_factory=list)
    slips_detected: int = 0
    overgrasp: Optional[float] = None
    info: Dict[str, object] = field(default_factory=dict)
    run: Optional[LabeledRun] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.outcome not in OUTCOMES:
            raise ValueError(f"unknown outcome {self.outcome!r}")
        if self.slip_distance_mm < 0:
            self.slip_distance_mm = 0.0

    def summary(self) -> dict:
        return {"outcome": self.outcome, "slip_distance_mm": self.slip_distance_mm,
                "slips_detected": self.slips_detected, "overgrasp": self.overgrasp,
                "trigger_ms": list(self.trigger_ms), **self.info}


class AlwaysStatic(SlipClassifier):
    """Negative control: never reports slip."""

    kind = "always-static"

    def __init__(self):
        self.classes_ = np.array([0, 1])
        self.n_features_in_ = 60

    def _decision(self, X):
        return np.full(X.shape[0], -1.0)


def overgrasp(g_cont: float, g_min: float, g_slip: float) -> float:
    """Excess grip over the minimum lift grip, relative to the contact-to-minimum span."""
    if g_min <= g_cont:
        raise ValueError(f"g_min ({g_min}) must exceed g_cont ({g_cont})")
    if g_slip < g_cont:
        raise ValueError(f"g_slip ({g_slip}) below g_cont ({g_cont})")
    return (g_slip - g_min) / (g_min - g_cont)


def _feed(detector: SlipDetector, frames) -> list:
    events = []
    for f in order_frames(frames):
        ev = detector.ingest(f)
        if ev is not None:
            events.append(ev)
    return events


def scenario_rail_catch(model, strategy: StrategyConfig = StrategyConfig(2, 1),
                        seed: int = 0, retract_speed: Optional[float] = None,
                        catch_step: float = 0.05,
                        noise: SensorNoiseProfile = SensorNoiseProfile(),
                        params: PhysicsParams = PhysicsParams(),
                        drop_mm: float = 60.0, settle_ms: int = 100) -> ScenarioResult:
    """Rail retraction with the detector wired to the catch action.

    A trigger before the labelled onset ends the trial as a false positive.
    Otherwise the finger squeezes in and the trial ends once the object has
    been stationary for ``settle_ms`` (caught) or has fallen ``drop_mm``.
    """
    if retract_speed is None:
        retract_speed = float(np.random.default_rng([seed, 1]).uniform(0.1, 5.0))
    trial = RailTrial(noise, retract_speed, seed, params, drop_mm=drop_mm)
    det = SlipDetector(model, strategy, sensor_ids=(0,))
    onset_ms = None
    still = 0
    outcome = None
    while not trial.done:
        frames = trial.step()
        rig = trial.rig
        if onset_ms is None and trial.drop > 2.0:
            onset_ms = rig.t_ms
        for ev in _feed(det, frames):
            if onset_ms is None:
                outcome = "false_positive"
                break
            trial.respond(catch_step)
        if outcome:
            break
        if trial.caught_command is not None:
            still = still + 1 if rig.state.stuck else 0
            if still >= settle_ms:
                outcome = "caught"
                break
    if outcome is None:
        outcome = "dropped"
    trig = [e.t_ms for e in det.triggers]
    info = {"seed": seed, "retract_speed": retract_speed, "onset_ms": onset_ms,
            "strategy": strategy.name,
            "latency_ms": (trig[0] - onset_ms) if trig and onset_ms is not None else None}
    return ScenarioResult(outcome, float(trial.drop), trig, det.log, len(trig), None, info,
                          trial.to_run(f"rail-catch-{seed}"))


def scenario_destabilise(model, strategy: StrategyConfig = StrategyConfig(2, 2),
                         mass_ramp_g_s: float = 50.0, seed: int = 0,
                         start_mass_g: float = 150.0, ramp_s: float = 3.0,
                         hold_margin: float = 0.01,
                         settle_s: float = 1.0, response_step: float = 0.02,
                         max_drop_mm: float = 80.0,
                         shares: Sequence[float] = (0.5, 0.25, 0.25),
                         noise: SensorNoiseProfile = SensorNoiseProfile(),
                         params: PhysicsParams = PhysicsParams()) -> ScenarioResult:
    """Hold an object while its mass grows; each trigger adds ``response_step`` grip.

    The grasp starts ``hold_margin`` grip units above breakaway. The object counts as caught unless it falls more than ``max_drop_mm``.
    """
    if mass_ramp_g_s < 0:
        raise ValueError("mass ramp must be >= 0")
    trial = GraspTrial(noise, shares, seed, params, mass_g=start_mass_g, hold_s=0.5,
                       margin=hold_margin, drop_mm=max_drop_mm)
    trial.close_and_hold()
    rig = trial.rig
    det = SlipDetector(model, strategy, sensor_ids=rig.frames.keys())
    grip = trial.g_hold
    t0 = rig.t_ms
    t_end = t0 + int((ramp_s + settle_s) * 1000)
    mass = start_mass_g
    while rig.t_ms < t_end and not trial.dropped:
        if rig.t_ms - t0 < ramp_s * 1000:
            mass += mass_ramp_g_s * 1e-3
            rig.set_state(mass_g=mass)
        frames = rig.step(grip)
        for _ in _feed(det, frames):
            grip = min(1.0, grip + response_step)
    outcome = "dropped" if trial.dropped else "caught"
    trig = [e.t_ms for e in det.triggers]
    info = {"seed": seed, "final_mass_g": mass, "final_grip": grip, "strategy": strategy.name,
            "mass_ramp_g_s": mass_ramp_g_s}
    return ScenarioResult(outcome, float(trial.drop), trig, det.log, len(trig), None, info,
                          trial.to_run(f"destabilise-{seed}"))


def scenario_first_grasp(model, mass_g: float, deformation_threshold: float = 0.5,
                         grip_step: float = 0.01, delay_s: float = 0.1,
                         lift_speed: float = 17.0, seed: int = 0,
                         close_speed: float = 0.1, rise_mm: float = 5.0,
                         max_lift_s: float = 8.0,
                         shares: Sequence[float] = (0.5, 0.25, 0.25),
                         noise: SensorNoiseProfile = SensorNoiseProfile(),
                         params: PhysicsParams = PhysicsParams()) -> ScenarioResult:
    """Grasp an unknown object with the lightest grip that lifts it.

    Close until the mean sensor deformation reaches the threshold, then raise
    the hand; every single-frame slip adds ``grip_step`` and starts a
    ``delay_s`` refractory period. Lifted once the object sticks to the hand
    and has risen ``rise_mm`` off the table.
    """
    if mass_g <= 0:
        raise ValueError("mass must be > 0")
    strategy = StrategyConfig(1, 1, refractory_ms=delay_s * 1000.0)
    trial = GraspTrial(noise, shares, seed, params, mass_g=mass_g, hold_s=0.0, margin=0.0)
    rig = trial.rig
    sensors = [i for i, s in enumerate(shares) if s > 0]
    # phase 1: close slowly against the table
    grip = rig.state.grip
    ref = {}
    deform = 0.0
    while True:
        frames = rig.step(grip)
        for f in frames:
            ref.setdefault(f.sensor_id, f.pins)
        latest = {i: rig.frames[i][-1].pins for i in sensors if rig.frames[i]}
        if len(latest) == len(sensors):
            deform = float(np.mean([pin_deformation(ref[i], latest[i]) for i in sensors]))
            if deform >= deformation_threshold:
                break
        if grip >= 1.0:
            return ScenarioResult("dropped", 0.0, info={"seed": seed, "reason": "no contact"})
        grip = min(1.0, grip + close_speed * 1e-3)
    g_contact = grip
    # phase 2: lift, reacting to every detected slip
    det = SlipDetector(model, strategy, sensor_ids=sensors)
    z_table = trial.z0
    t_end = rig.t_ms + int(max_lift_s * 1000)
    outcome = "dropped"
    while rig.t_ms < t_end:
        frames = rig.step(grip, hand_velocity=lift_speed)
        for _ in _feed(det, [f for f in frames if f.sensor_id in sensors]):
            grip = min(1.0, grip + grip_step)
        s = rig.state
        if s.stuck and not s.on_support and s.obj_z - z_table >= rise_mm:
            outcome = "lifted"
            break
    g_slip = rig.state.grip
    try:
        g_min = find_g_min(mass_g, params)
        o = overgrasp(params.g_cont, g_min, g_slip)
    except (PhysicsError, ValueError):
        g_min, o = None, None
    trig = [e.t_ms for e in det.triggers]
    # the hand and object start level, so their gap is the distance slipped
    slip = max(0.0, rig.state.hand_z - rig.state.obj_z)
    info = {"seed": seed, "mass_g": mass_g, "g_cont": params.g_cont, "g_contact": g_contact,
            "g_slip": g_slip, "g_min": g_min, "deformation_at_contact": deform}
    return ScenarioResult(outcome, float(slip), trig, det.log, len(trig), o, info,
                          trial.to_run(f"first-grasp-{seed}"))
