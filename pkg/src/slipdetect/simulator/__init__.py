from .generators import gen_grasp_run, gen_single_finger_run
from .physics import GraspState, PhysicsError, PhysicsParams, find_g_min, step_grasp
from .tactile import SensorNoiseProfile

__all__ = ["gen_grasp_run", "gen_single_finger_run", "GraspState", "PhysicsError",
           "PhysicsParams", "find_g_min", "step_grasp", "SensorNoiseProfile"]
