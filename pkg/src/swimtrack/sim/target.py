from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from swimtrack.config import TargetConfig


@dataclass
class TargetState:
    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    regime_timer: int = 0


def step_target(target: TargetState, rng: np.random.Generator, dt: float, cfg: TargetConfig) -> TargetState:
    """Piecewise constant-velocity random walk.

    The target moves at its current velocity; once the regime timer runs out
    a new velocity is drawn uniformly from the speed box and a new segment
    length uniformly from ``[t_min, t_max]`` steps.
    """
    velocity = target.velocity
    timer = target.regime_timer
    if timer <= 0:
        box = np.asarray(cfg.speed_box, dtype=float)
        velocity = rng.uniform(-box, box)
        speed = np.linalg.norm(velocity)
        if speed > cfg.v_max:
            velocity = velocity * (cfg.v_max / speed)
        timer = int(rng.integers(cfg.t_min, cfg.t_max + 1))
    return TargetState(target.position + velocity * dt, velocity, timer - 1)
