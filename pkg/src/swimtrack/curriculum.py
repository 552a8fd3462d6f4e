"""PID-shielded training schedule and spiral-search recovery."""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from swimtrack.agent import ActionGrid
from swimtrack.config import CurriculumConfig, VisionConfig
from swimtrack.sim.dynamics import RateCommand
from swimtrack.tracker import TrackState


class Stage(str, Enum):
    PID_EXPLORE = "PID_EXPLORE"
    SHARED_CONTROL = "SHARED_CONTROL"
    RL_ONLY = "RL_ONLY"


@dataclass(frozen=True)
class CurriculumStage:
    stage: Stage
    outer_region_fraction: float
    random_action_prob: float = 0.3


class CurriculumSchedule:
    """PID_EXPLORE until the replay is prefilled, then SHARED_CONTROL with an
    outer band shrinking linearly to zero, then RL_ONLY. Never goes back."""

    def __init__(self, cfg: CurriculumConfig):
        self.cfg = cfg
        self.shared_start: int | None = None
        self.current = CurriculumStage(Stage.PID_EXPLORE, cfg.outer_start, cfg.random_action_prob)

    def fraction_at(self, steps_in_shared: int) -> float:
        if self.cfg.decay_steps <= 0:
            return 0.0
        left = 1.0 - steps_in_shared / self.cfg.decay_steps
        return max(0.0, self.cfg.outer_start * left)

    def advance(self, step: int, replay_size: int) -> CurriculumStage:
        cfg = self.cfg
        stage = self.current.stage
        if stage is Stage.PID_EXPLORE and replay_size >= cfg.min_prefill:
            self.shared_start = step
            stage = Stage.SHARED_CONTROL
        if stage is Stage.SHARED_CONTROL:
            fraction = self.fraction_at(step - self.shared_start)
            if fraction <= 0.0:
                stage = Stage.RL_ONLY
                fraction = 0.0
            self.current = CurriculumStage(stage, fraction, cfg.random_action_prob)
        elif stage is Stage.RL_ONLY:
            self.current = CurriculumStage(stage, 0.0, cfg.random_action_prob)
        return self.current


def advance_stage(schedule: CurriculumSchedule, step: int, replay_size: int) -> CurriculumStage:
    return schedule.advance(step, replay_size)


def in_outer_region(x_c: float, y_c: float, fraction: float) -> bool:
    return max(abs(x_c), abs(y_c)) > 1.0 - fraction


def shared_control_arbiter(track: TrackState, stage: CurriculumStage, rl_choice, pid_choice,
                           grid: ActionGrid, rng: np.random.Generator):
    """Pick who acts this step.

    ``rl_choice`` and ``pid_choice`` are ``(yaw_idx, pitch_idx)`` pairs. In the
    outer band the PID acts, replaced by a uniformly random grid action with
    probability ``random_action_prob``; inside, the RL choice stands.
    Returns ``(yaw_idx, pitch_idx, controller_in_charge)``.
    """
    if stage.stage is not Stage.SHARED_CONTROL:
        raise ValueError("the arbiter only runs during SHARED_CONTROL")
    if not in_outer_region(track.x[0], track.x[1], stage.outer_region_fraction):
        return rl_choice[0], rl_choice[1], "RL"
    if rng.random() < stage.random_action_prob:
        return (int(rng.integers(len(grid.yaw_levels))), int(rng.integers(len(grid.pitch_levels))),
                "PID_RANDOM")
    return pid_choice[0], pid_choice[1], "PID"


@dataclass
class RecoveryState:
    """Spiral search in (yaw, pitch) look-offset space.

    Offsets are measured from the view direction at the moment of loss. The
    spiral is centred on the target's last known bearing, so the first
    command slews toward it; ``offset`` dead-reckons the commanded rates.
    """

    last_bearing: tuple[float, float]
    spiral_angle: float
    spiral_radius: float
    steps: int = 0
    offset: tuple[float, float] = (0.0, 0.0)

    @classmethod
    def start(cls, last_xy: tuple[float, float], vision: VisionConfig, cfg: CurriculumConfig) -> "RecoveryState":
        # rotation that would bring the last seen image position to the centre
        yaw_off = -math.atan(last_xy[0] * math.tan(vision.horizontal_fov / 2))
        pitch_off = -math.atan(last_xy[1] * math.tan(vision.vertical_fov / 2))
        return cls((yaw_off, pitch_off), math.atan2(pitch_off, yaw_off), cfg.spiral_r0)


def spiral_path(rec: RecoveryState, cfg: CurriculumConfig, n_steps: int) -> np.ndarray:
    """The first ``n_steps`` spiral points relative to the spiral centre."""
    n = np.arange(n_steps)
    theta0 = rec.spiral_angle - rec.steps * cfg.spiral_dtheta
    angle = theta0 + n * cfg.spiral_dtheta
    radius = cfg.spiral_r0 + cfg.spiral_c * n * cfg.spiral_dtheta
    return np.stack([radius * np.cos(angle), radius * np.sin(angle)], axis=1)


def spiral_search_step(rec: RecoveryState, cfg: CurriculumConfig, dt: float,
                       max_rate: float) -> tuple[RateCommand, RecoveryState]:
    """Rate command steering the look offset toward the next spiral point.

    Spiral point n sits at radius ``r0 + c * n * dtheta`` and angle
    ``theta0 + n * dtheta`` around the last bearing. Rates are proportional
    to the remaining offset error and limited in norm to ``max_rate``.
    """
    radius = rec.spiral_radius
    goal = (rec.last_bearing[0] + radius * math.cos(rec.spiral_angle),
            rec.last_bearing[1] + radius * math.sin(rec.spiral_angle))
    yaw = cfg.spiral_gain * (goal[0] - rec.offset[0]) / dt
    pitch = cfg.spiral_gain * (goal[1] - rec.offset[1]) / dt
    norm = math.hypot(yaw, pitch)
    if norm > max_rate:
        # scale both axes so the direction survives the rate limit
        yaw, pitch = yaw * max_rate / norm, pitch * max_rate / norm
    n = rec.steps + 1
    new = RecoveryState(
        rec.last_bearing,
        rec.spiral_angle + cfg.spiral_dtheta,
        cfg.spiral_r0 + cfg.spiral_c * n * cfg.spiral_dtheta,
        n,
        (rec.offset[0] + yaw * dt, rec.offset[1] + pitch * dt),
    )
    return RateCommand(cfg.search_speed, yaw, pitch), new
