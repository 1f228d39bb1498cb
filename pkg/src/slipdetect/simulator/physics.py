"""Kinematic grasp friction model.

Heights are in mm, velocities in mm/s, accelerations in mm/s^2, masses in
grams and forces in newtons. The grip ``g`` is the fraction of the finger
actuation range; the squeeze becomes a normal force only above ``g_cont``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Tuple

import numpy as np

GRAVITY = 9.81  # m/s^2


class PhysicsError(ValueError):
    pass


@dataclass(frozen=True)
class PhysicsParams:
    mu: float = 0.8
    grip_gain: float = 40.0          # N of total normal force per unit grip above contact
    g_cont: float = 0.3
    momentum_factor: float = 1.2     # moving object: friction capacity divided by this
    stick_limit_mm: float = 2.0      # relative travel before the skin lets go
    grip_rate: float = 1.0           # max finger speed, grip units per second
    hand_accel: float = 200.0        # mm/s^2 cap on hand velocity changes

    def capacity(self, grip: float, share_in_contact: float = 1.0) -> float:
        return self.mu * self.grip_gain * max(0.0, grip - self.g_cont) * share_in_contact


@dataclass(frozen=True)
class GraspState:
    t: float                          # s
    grip: float
    shares: Tuple[float, ...]
    mass_g: float
    obj_z: float
    obj_v: float
    hand_z: float
    hand_v: float
    stuck: bool = True
    slip_disp: float = 0.0            # relative travel since last stick, mm
    support_z: Optional[float] = None # table / fixture height, None when unsupported
    params: PhysicsParams = PhysicsParams()

    @property
    def contact(self) -> Tuple[bool, ...]:
        touching = self.grip > self.params.g_cont
        return tuple(touching and s > 0 for s in self.shares)

    @property
    def share_in_contact(self) -> float:
        return float(sum(s for s, c in zip(self.shares, self.contact) if c))

    @property
    def capacity(self) -> float:
        return self.params.capacity(self.grip, self.share_in_contact)

    @property
    def weight(self) -> float:
        return self.mass_g * 1e-3 * GRAVITY

    def normal_forces(self) -> np.ndarray:
        total = self.params.grip_gain * max(0.0, self.grip - self.params.g_cont)
        return total * np.asarray(self.shares, dtype=float)

    @property
    def rel_v(self) -> float:
        return self.obj_v - self.hand_v

    @property
    def on_support(self) -> bool:
        return self.support_z is not None and self.obj_z <= self.support_z + 1e-9


def _approach(x, target, max_step):
    if max_step is None or not np.isfinite(max_step):
        return target
    return x + float(np.clip(target - x, -max_step, max_step))


def step_grasp(state: GraspState, dt: float, grip_command: float,
               hand_velocity: Optional[float] = None) -> GraspState:
    """Advance the grasp by ``dt`` seconds.

    The grip moves toward ``grip_command`` at the finger speed limit and the
    hand toward ``hand_velocity`` at the hand acceleration limit. A held object
    follows the hand while static friction covers weight plus inertia. Once it
    moves relative to the hand the available friction drops by the momentum
    factor, so arresting a slip takes more squeeze than holding did.
    """
    if dt <= 0:
        raise PhysicsError("dt must be > 0")
    p = state.params
    grip = float(np.clip(_approach(state.grip, float(grip_command), p.grip_rate * dt), 0.0, 1.0))
    v_cmd = state.hand_v if hand_velocity is None else float(hand_velocity)
    hand_v = _approach(state.hand_v, v_cmd, p.hand_accel * dt)
    hand_a = (hand_v - state.hand_v) / dt
    hand_z = state.hand_z + 0.5 * (state.hand_v + hand_v) * dt

    s = replace(state, grip=grip)
    cap = s.capacity
    m_kg = state.mass_g * 1e-3
    # friction needed to carry the object along with the hand, N
    f_req = m_kg * (GRAVITY + hand_a * 1e-3)

    obj_z, obj_v = state.obj_z, state.obj_v
    stuck, slip_disp = state.stuck, state.slip_disp
    resting = state.on_support and hand_v <= 0.0 and state.obj_v <= 0.0

    if stuck and (resting or cap >= f_req):
        if resting:
            obj_v = 0.0
        else:
            obj_z = obj_z + (hand_z - state.hand_z)
            obj_v = hand_v
            if state.on_support and obj_z < state.support_z:
                obj_z = state.support_z
    else:
        rel = state.obj_v - state.hand_v
        # friction pushes the object toward the hand's velocity; at breakaway
        # the tendency is downward because the weight wins
        direction = 1.0 if rel <= 0.0 else -1.0
        f_kin = cap / p.momentum_factor
        a = (direction * f_kin / m_kg - GRAVITY) * 1e3
        if state.on_support and a < 0.0 and obj_v <= 0.0:
            a, obj_v = 0.0, 0.0
        new_v = obj_v + a * dt
        new_z = obj_z + obj_v * dt + 0.5 * a * dt * dt
        if state.support_z is not None and new_z < state.support_z:
            new_z, new_v = state.support_z, 0.0
        new_rel = new_v - hand_v
        travel = abs((new_z - obj_z) - (hand_z - state.hand_z))
        if (direction > 0 and new_rel >= 0.0) or (direction < 0 and new_rel <= 0.0):
            # relative motion reversed within the step: the contact sticks again
            new_v = hand_v
            stuck, slip_disp = True, 0.0
        else:
            stuck = False
            slip_disp = slip_disp + travel
        obj_z, obj_v = new_z, new_v

    return replace(s, t=state.t + dt, obj_z=obj_z, obj_v=obj_v,
                   hand_z=hand_z, hand_v=hand_v, stuck=stuck, slip_disp=slip_disp)


def find_g_min(mass_g: float, params: PhysicsParams = PhysicsParams(),
               lift_accel: Optional[float] = None, tol: float = 1e-4) -> float:
    """Smallest grip whose static friction carries ``mass_g`` at lift acceleration.

    Bisection over the grip range; ``lift_accel`` defaults to the hand
    acceleration limit (mm/s^2).
    """
    if mass_g <= 0:
        raise PhysicsError("mass must be > 0")
    a = params.hand_accel if lift_accel is None else lift_accel
    need = mass_g * 1e-3 * (GRAVITY + a * 1e-3)
    if params.capacity(1.0) < need:
        raise PhysicsError(f"{mass_g} g cannot be lifted within the grip range")
    lo, hi = params.g_cont, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if params.capacity(mid) >= need:
            hi = mid
        else:
            lo = mid
    return hi
