"""Synthetic pin-field model of an optical tactile fingertip."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List

import numpy as np

from ..features import N_PINS

CENTER = np.array([160.0, 120.0])
RINGS = ((6, 25.0), (10, 50.0), (14, 75.0))
OUTER_RADIUS = RINGS[-1][1]
PIN_DECIMALS = 3


def pin_layout() -> np.ndarray:
    """Rest positions of the 30 pins: three concentric rings."""
    pts = []
    for k, (n, r) in enumerate(RINGS):
        phase = 0.5 * k * np.pi / n
        ang = phase + 2.0 * np.pi * np.arange(n) / n
        pts.append(np.column_stack([r * np.cos(ang), r * np.sin(ang)]))
    pins = CENTER + np.vstack(pts)
    assert pins.shape == (N_PINS, 2)
    return pins


@dataclass(frozen=True)
class SensorNoiseProfile:
    """Signal and nuisance parameters of one fingertip.

    Velocities are in pixels per frame. ``slip_gain`` converts relative
    object speed (mm/s) into co-linear pin speed. During gross slip the signal
    keeps full strength for ``decay_hold`` frames, then shrinks by
    ``slip_decay`` per frame while the contact is unloading.
    """

    jitter_px: float = 0.03
    transient_shift_px: float = 1.2
    transient_radial_px: float = 2.5
    transient_frames: int = 5
    transient_rate: float = 1.5
    slip_gain: float = 0.02
    slip_decay: float = 0.75
    decay_hold: int = 3
    angular_dispersion: float = 0.15
    magnitude_dispersion: float = 0.1
    deform_px_per_n: float = 2.5
    shear_px_per_n: float = 0.6

    def __post_init__(self):
        for name in ("jitter_px", "transient_shift_px", "transient_radial_px",
                     "transient_rate", "slip_gain", "angular_dispersion",
                     "magnitude_dispersion", "deform_px_per_n", "shear_px_per_n"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if not 0.0 < self.slip_decay <= 1.0:
            raise ValueError("slip_decay must be in (0, 1]")
        if self.transient_frames < 1 or self.decay_hold < 0:
            raise ValueError("transient_frames >= 1 and decay_hold >= 0 required")

    @property
    def transients_enabled(self) -> bool:
        return self.transient_rate > 0 and (self.transient_shift_px > 0 or self.transient_radial_px > 0)


@dataclass
class _Burst:
    t0_ms: float
    dur_ms: float
    radial: float
    shift: np.ndarray

    def offset(self, t_ms):
        u = (t_ms - self.t0_ms) / self.dur_ms
        if u <= 0.0 or u >= 1.0:
            return 0.0
        return np.sin(np.pi * u) ** 2


@dataclass
class FingertipModel:
    """Stateful pin generator for one sensor over one run.

    Call :meth:`frame` once per camera frame with the sensor's current normal
    load and, during gross slip, the object speed relative to the finger
    (mm/s, positive when the object slides down).
    """

    profile: SensorNoiseProfile
    rng: np.random.Generator
    slip_direction: float = np.pi / 2
    shear_direction: float = 0.0
    rest: np.ndarray = field(default_factory=pin_layout)
    bursts: List[_Burst] = field(default_factory=list)

    def __post_init__(self):
        self._radial = (self.rest - CENTER) / OUTER_RADIUS
        self._slip_accum = np.zeros((N_PINS, 2))
        self._frames_in_slip = 0
        self._strength = 1.0
        self._last_load = None

    def add_burst(self, t0_ms: float, scale: float = 1.0):
        p = self.profile
        ang = self.rng.uniform(-np.pi, np.pi)
        shift = scale * p.transient_shift_px * np.array([np.cos(ang), np.sin(ang)])
        dur = p.transient_frames * 1000.0 / 60.0
        self.bursts.append(_Burst(float(t0_ms), dur, scale * p.transient_radial_px, shift))

    def frame(self, t_ms: float, load_n: float, slip_speed: float,
              in_gross_slip: bool, weight: float = 1.0) -> np.ndarray:
        p = self.profile
        rng = self.rng
        unloading = self._last_load is not None and load_n < self._last_load - 1e-12
        self._last_load = load_n

        if in_gross_slip and slip_speed != 0.0:
            if self._frames_in_slip >= p.decay_hold and unloading:
                self._strength *= p.slip_decay
            mag = p.slip_gain * abs(slip_speed) * self._strength * weight
            sign = 1.0 if slip_speed > 0 else -1.0
            ang = (self.slip_direction + (0.0 if sign > 0 else np.pi)
                   + p.angular_dispersion * rng.standard_normal(N_PINS))
            m = mag * (1.0 + p.magnitude_dispersion * rng.standard_normal(N_PINS))
            self._slip_accum += np.column_stack([m * np.cos(ang), m * np.sin(ang)])
            self._frames_in_slip += 1
        elif not in_gross_slip:
            self._frames_in_slip = 0
            self._strength = 1.0

        radial = p.deform_px_per_n * load_n
        shear = p.shear_px_per_n * load_n * np.array(
            [np.cos(self.shear_direction), np.sin(self.shear_direction)])
        shift = np.zeros(2)
        for b in self.bursts:
            w = b.offset(t_ms)
            if w:
                radial += b.radial * w
                shift += b.shift * w
        pins = (self.rest + radial * self._radial + shear + shift + self._slip_accum
                + p.jitter_px * rng.standard_normal((N_PINS, 2)))
        return np.round(pins, PIN_DECIMALS)
