"""Pin-velocity features for optical tactile sensors.

A sensor reports 30 tracked pin centroids per frame. Slip shows up as fast,
co-linear pin motion, so the classifier input is the per-frame pin velocity in
polar form, with the angles re-centred on their circular mean so that the
representation does not depend on the slip direction.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

N_PINS = 30
N_FEATURES = 2 * N_PINS
FEATURE_LAYOUT = "dr30-dtheta30-centred/v1"

_RESULTANT_EPS = 1e-9


class FrameError(ValueError):
    """Raised when two frames cannot be differenced."""


@dataclass(frozen=True)
class PinFrame:
    """One sensor's pin coordinates at a timestamp (ms, pixels)."""

    timestamp: int
    sensor_id: int
    pins: np.ndarray

    def __post_init__(self):
        pins = np.asarray(self.pins, dtype=float)
        if pins.shape != (N_PINS, 2):
            raise FrameError(f"expected ({N_PINS}, 2) pin array, got {pins.shape}")
        object.__setattr__(self, "pins", pins)
        object.__setattr__(self, "timestamp", int(self.timestamp))
        object.__setattr__(self, "sensor_id", int(self.sensor_id))


@dataclass(frozen=True)
class FeatureSample:
    features: np.ndarray
    sensor_id: int
    timestamp: int
    label: Optional[int] = None


def _check_pair(prev: PinFrame, cur: PinFrame) -> None:
    if prev.sensor_id != cur.sensor_id:
        raise FrameError(
            f"sensor mismatch: {prev.sensor_id} vs {cur.sensor_id}")
    if cur.timestamp <= prev.timestamp:
        raise FrameError(
            f"non-increasing timestamp: {prev.timestamp} -> {cur.timestamp}")


def compute_velocities(prev: PinFrame, cur: PinFrame) -> np.ndarray:
    """Per-pin displacement between consecutive frames, pixels per frame."""
    _check_pair(prev, cur)
    return cur.pins - prev.pins


def to_polar(dxy: np.ndarray) -> np.ndarray:
    """Map (dx, dy) rows to (dr, dtheta) rows; the null vector maps to (0, 0)."""
    dxy = np.asarray(dxy, dtype=float)
    dx, dy = dxy[..., 0], dxy[..., 1]
    dr = np.hypot(dx, dy)
    # atan2(0, 0) is already 0 for +0.0; normalise -0.0 inputs too
    dtheta = np.where(dr > 0.0, np.arctan2(dy, dx), 0.0)
    return np.stack([dr, dtheta], axis=-1)


def wrap_angle(theta):
    """Wrap angles into (-pi, pi]."""
    wrapped = np.mod(np.asarray(theta, dtype=float) + np.pi, 2.0 * np.pi) - np.pi
    return np.where(wrapped == -np.pi, np.pi, wrapped)


def circular_mean(thetas: np.ndarray, weights: Optional[np.ndarray] = None):
    """Return (mean direction, resultant length) of a set of angles."""
    thetas = np.asarray(thetas, dtype=float)
    w = 1.0 if weights is None else np.asarray(weights, dtype=float)
    s = (w * np.sin(thetas)).sum(axis=-1)
    c = (w * np.cos(thetas)).sum(axis=-1)
    return np.arctan2(s, c), np.hypot(s, c)


def center_angles(thetas: np.ndarray, radii: Optional[np.ndarray] = None) -> np.ndarray:
    """Subtract the circular mean from each angle and re-wrap.

    When ``radii`` is given, pins that did not move (radius 0, angle 0 by
    convention) are left out of the mean. When the resultant length falls
    below 1e-9 the mean is undefined and the angles are returned unchanged.
    """
    thetas = np.asarray(thetas, dtype=float)
    presence = None if radii is None else np.asarray(radii) > 0.0
    mu, resultant = circular_mean(thetas, presence)
    if np.ndim(mu) == 0:
        if resultant < _RESULTANT_EPS:
            return thetas.copy()
        return wrap_angle(thetas - mu)
    mu = np.where(resultant < _RESULTANT_EPS, 0.0, mu)
    return wrap_angle(thetas - mu[..., None])


def polar_features(dxy: np.ndarray) -> np.ndarray:
    """Velocity array(s) of shape (..., 30, 2) to feature array(s) (..., 60)."""
    polar = to_polar(dxy)
    dr = polar[..., 0]
    dtheta = center_angles(polar[..., 1], dr)
    return np.concatenate([dr, dtheta], axis=-1)


def featurize(prev: PinFrame, cur: PinFrame) -> FeatureSample:
    dxy = compute_velocities(prev, cur)
    return FeatureSample(polar_features(dxy), cur.sensor_id, cur.timestamp)


def stream_features(pins: np.ndarray) -> np.ndarray:
    """Features of every consecutive pair in a (n, 30, 2) stream -> (n-1, 60)."""
    pins = np.asarray(pins, dtype=float)
    if pins.ndim != 3 or pins.shape[1:] != (N_PINS, 2):
        raise FrameError(f"expected (n, {N_PINS}, 2) stream, got {pins.shape}")
    return polar_features(np.diff(pins, axis=0))


def mean_velocity_norm(features: np.ndarray) -> np.ndarray:
    """Norm of the mean pin velocity recovered from (dr, centred dtheta) rows.

    Centring is a common rotation, so it leaves the mean vector's length intact.
    """
    features = np.atleast_2d(np.asarray(features, dtype=float))
    dr = features[:, :N_PINS]
    th = features[:, N_PINS:]
    mx = (dr * np.cos(th)).mean(axis=1)
    my = (dr * np.sin(th)).mean(axis=1)
    return np.hypot(mx, my)


def deformation(frame0: PinFrame, frame_t: PinFrame) -> float:
    """Mean per-pin displacement from a contact-free reference frame, pixels."""
    if frame0.sensor_id != frame_t.sensor_id:
        raise FrameError(
            f"sensor mismatch: {frame0.sensor_id} vs {frame_t.sensor_id}")
    return float(pin_deformation(frame0.pins, frame_t.pins))


def pin_deformation(pins0: np.ndarray, pins_t: np.ndarray) -> float:
    d = np.asarray(pins_t, dtype=float) - np.asarray(pins0, dtype=float)
    return float(np.hypot(d[..., 0], d[..., 1]).mean())


class PinVelocityFeaturizer(TransformerMixin, BaseEstimator):
    """Transform a pin stream of shape (n, 30, 2) into (n - 1, 60) features.

    Stateless; ``fit`` only records the layout so the transformer composes
    inside a pipeline.
    """

    def fit(self, X, y=None):
        X = np.asarray(X, dtype=float)
        if X.ndim != 3 or X.shape[1:] != (N_PINS, 2):
            raise FrameError(f"expected (n, {N_PINS}, 2) stream, got {X.shape}")
        self.n_features_out_ = N_FEATURES
        self.layout_ = FEATURE_LAYOUT
        return self

    def transform(self, X):
        return stream_features(X)
