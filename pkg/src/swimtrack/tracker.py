"""Single-target SORT-style tracker.

Constant-velocity Kalman filter over the 10-vector
``[x_c, y_c, area, aspect, conf, dx_c, dy_c, darea, daspect, dconf]``, an IoU
gate against the predicted box, and coasting until the track is LOST.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from swimtrack.config import TrackerConfig
from swimtrack.vision import BBoxObservation

N_STATE = 10
N_MEAS = 5


@dataclass
class TrackState:
    x: np.ndarray
    P: np.ndarray
    age_since_update: int = 0

    def copy(self) -> "TrackState":
        return TrackState(self.x.copy(), self.P.copy(), self.age_since_update)


@dataclass
class KfModel:
    F: np.ndarray
    H: np.ndarray
    Q: np.ndarray
    R: np.ndarray

    @classmethod
    def constant_velocity(cls, dt: float, cfg: TrackerConfig) -> "KfModel":
        F = np.eye(N_STATE)
        F[:N_MEAS, N_MEAS:] = dt * np.eye(N_MEAS)
        H = np.zeros((N_MEAS, N_STATE))
        H[:, :N_MEAS] = np.eye(N_MEAS)
        Q = np.diag([cfg.q_position] * N_MEAS + [cfg.q_velocity] * N_MEAS)
        R = np.diag(np.square([cfg.r_center, cfg.r_center, cfg.r_area, cfg.r_aspect, cfg.r_confidence]))
        return cls(F, H, Q, R)


def kf_predict(track: TrackState, model: KfModel) -> TrackState:
    x = model.F @ track.x
    P = model.F @ track.P @ model.F.T + model.Q
    P = 0.5 * (P + P.T)
    return TrackState(x, P, track.age_since_update + 1)


def kf_update(track: TrackState, z: np.ndarray, model: KfModel) -> TrackState:
    z = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(z)):
        raise ValueError("measurement must be finite")
    H = model.H
    innovation = z - H @ track.x
    S = H @ track.P @ H.T + model.R
    # K = P H^T S^-1, solved rather than inverted
    K = np.linalg.solve(S, H @ track.P).T
    x = track.x + K @ innovation
    P = (np.eye(N_STATE) - K @ H) @ track.P
    P = 0.5 * (P + P.T)
    return TrackState(x, P, 0)


def bbox_corners(x_c: float, y_c: float, area: float, aspect: float) -> tuple[float, float, float, float]:
    """Box ``(x1, y1, x2, y2)`` in normalized image coordinates."""
    area = max(area, 0.0)
    aspect = max(aspect, 1e-9)
    half_w = math.sqrt(area * aspect)
    half_h = math.sqrt(area / aspect)
    return x_c - half_w, y_c - half_h, x_c + half_w, y_c + half_h


def iou(a: tuple[float, float, float, float], b: tuple[float, float, float, float]) -> float:
    w = max(0.0, min(a[2], b[2]) - max(a[0], b[0]))
    h = max(0.0, min(a[3], b[3]) - max(a[1], b[1]))
    inter = w * h
    union = (a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter
    return inter / union if union > 0 else 0.0


def associate(track: TrackState, obs: BBoxObservation, iou_min: float) -> bool:
    if not obs.detected:
        return False
    predicted = bbox_corners(*track.x[:4])
    observed = bbox_corners(obs.x_c, obs.y_c, obs.area, obs.aspect)
    return iou(predicted, observed) >= iou_min


class SingleTargetTracker:
    """Predict/associate/update loop over a single track."""

    def __init__(self, cfg: TrackerConfig, dt: float):
        self.cfg = cfg
        self.model = KfModel.constant_velocity(dt, cfg)
        self.track: TrackState | None = None
        self.misses = 0

    @property
    def lost(self) -> bool:
        return self.track is None

    def reset(self) -> None:
        self.track = None
        self.misses = 0

    def _initiate(self, obs: BBoxObservation) -> TrackState:
        x = np.zeros(N_STATE)
        x[:N_MEAS] = obs.measurement()
        P = np.diag([self.cfg.p0_position] * N_MEAS + [self.cfg.p0_velocity] * N_MEAS)
        return TrackState(x, P, 0)

    def step(self, obs: BBoxObservation) -> tuple[TrackState | None, bool]:
        """Consume one frame. Returns the posterior (None when LOST) and
        whether the observation was accepted."""
        if self.track is None:
            if obs.detected:
                self.track = self._initiate(obs)
                self.misses = 0
                return self.track, True
            return None, False
        predicted = kf_predict(self.track, self.model)
        if associate(predicted, obs, self.cfg.iou_min):
            self.track = kf_update(predicted, obs.measurement(), self.model)
            self.misses = 0
            return self.track, True
        self.misses += 1
        if self.misses >= self.cfg.max_coast:
            self.reset()
            return None, False
        self.track = predicted
        return self.track, False
