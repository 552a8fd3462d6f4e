"""Synthetic detector: what a bounding-box detector would report each frame.

Image coordinates are normalized with the origin at the image center and
``x_c, y_c`` in ``[-1, 1]``; ``x_c`` grows to the right and ``y_c`` upward.
Area is the fraction of the image covered by the box.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from swimtrack.config import VisionConfig
from swimtrack.sim.dynamics import RobotState, quat_to_matrix
from swimtrack.sim.target import TargetState


@dataclass(frozen=True)
class BBoxObservation:
    detected: bool
    x_c: float = 0.0
    y_c: float = 0.0
    area: float = 0.0
    aspect: float = 1.0
    confidence: float = 0.0

    def measurement(self) -> np.ndarray:
        return np.array([self.x_c, self.y_c, self.area, self.aspect, self.confidence])


MISS = BBoxObservation(False)


@dataclass(frozen=True)
class CameraModel:
    horizontal_fov: float
    vertical_fov: float

    @classmethod
    def from_config(cls, cfg: VisionConfig) -> "CameraModel":
        return cls(cfg.horizontal_fov, cfg.vertical_fov)

    def project(self, rel_body: np.ndarray) -> tuple[float, float] | None:
        """Pinhole projection of a body-frame point, or None if behind."""
        fwd = rel_body[0]
        if fwd <= 0:
            return None
        x_c = (-rel_body[1] / fwd) / math.tan(self.horizontal_fov / 2)
        y_c = (rel_body[2] / fwd) / math.tan(self.vertical_fov / 2)
        return x_c, y_c

    def box_area(self, radius: float, distance: float) -> float:
        # half-extent of the box as a fraction of the half-image, per axis
        wf = radius / (distance * math.tan(self.horizontal_fov / 2))
        hf = radius / (distance * math.tan(self.vertical_fov / 2))
        return wf * hf

    def box_aspect(self) -> float:
        return math.tan(self.vertical_fov / 2) / math.tan(self.horizontal_fov / 2)


@dataclass(frozen=True)
class ConfidenceField:
    base_confidence: float = 0.9
    left_bias_strength: float = 0.0
    noise_sigma: float = 0.0

    @classmethod
    def from_config(cls, cfg: VisionConfig) -> "ConfidenceField":
        return cls(cfg.base_confidence, cfg.left_bias_strength, cfg.confidence_sigma)

    def mean(self, x_c: float) -> float:
        value = self.base_confidence - self.left_bias_strength * max(0.0, -x_c)
        return min(1.0, max(0.0, value))

    def sample(self, x_c: float, rng: np.random.Generator | None) -> float:
        value = self.base_confidence - self.left_bias_strength * max(0.0, -x_c)
        if rng is not None and self.noise_sigma > 0:
            value += rng.normal(0.0, self.noise_sigma)
        return min(1.0, max(0.0, value))


def observe(
    robot: RobotState,
    target: TargetState,
    cam: CameraModel,
    field: ConfidenceField,
    cfg: VisionConfig,
    rng: np.random.Generator | None,
) -> BBoxObservation:
    """Project the target into the camera and corrupt it like a detector.

    Pass ``rng=None`` for a noise-free, dropout-free observation.
    """
    rel = quat_to_matrix(robot.orientation).T @ (target.position - robot.position)
    distance = float(np.linalg.norm(rel))
    proj = cam.project(rel)
    if proj is None or distance > cfg.max_range:
        return MISS
    x_c, y_c = proj
    if abs(x_c) > 1.0 or abs(y_c) > 1.0:
        return MISS
    area = min(1.0, cam.box_area(cfg.target_radius, max(distance, 1e-6)))
    if rng is not None:
        x_c += rng.normal(0.0, cfg.center_sigma)
        y_c += rng.normal(0.0, cfg.center_sigma)
        area = min(1.0, max(1e-6, area + rng.normal(0.0, cfg.area_sigma)))
    confidence = field.sample(x_c, rng)
    if rng is not None and rng.random() < (1.0 - confidence) * cfg.p_drop:
        return MISS
    return BBoxObservation(True, float(x_c), float(y_c), float(area), cam.box_aspect(), float(confidence))
