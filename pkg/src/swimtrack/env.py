"""Closed loop plumbing: simulator, delay line, synthetic vision and tracker."""
from __future__ import annotations

import numpy as np

from swimtrack.config import Config
from swimtrack.sim.delay import DelayLine
from swimtrack.sim.dynamics import LegMixer, RateCommand, RobotState, step_dynamics
from swimtrack.sim.target import TargetState, step_target
from swimtrack.tracker import SingleTargetTracker, TrackState
from swimtrack.vision import BBoxObservation, CameraModel, ConfidenceField, observe

STREAMS = ("target", "vision", "policy", "replay", "setpoint")


def rng_streams(seed: int) -> dict[str, np.random.Generator]:
    """Independent generators per consumer, all derived from one seed."""
    children = np.random.SeedSequence(seed).spawn(len(STREAMS))
    return {name: np.random.default_rng(s) for name, s in zip(STREAMS, children)}


class TrackingEnv:
    def __init__(self, cfg: Config, rngs: dict[str, np.random.Generator]):
        self.cfg = cfg
        self.rngs = rngs
        self.mixer = LegMixer.from_params(cfg.actuator)
        self.cam = CameraModel.from_config(cfg.vision)
        self.field = ConfidenceField.from_config(cfg.vision)
        self.tracker = SingleTargetTracker(cfg.tracker, cfg.sim.dt)
        self.reset()

    def reset(self) -> None:
        cfg = self.cfg
        self.robot = RobotState()
        self.target = TargetState(np.array([cfg.sim.start_distance, 0.0, 0.0]), np.zeros(3), 0)
        self.delay = DelayLine(cfg.sim.delay_steps)
        self.tracker.reset()
        self.t = 0
        self._sense()

    def _sense(self) -> None:
        self.obs: BBoxObservation = observe(self.robot, self.target, self.cam, self.field,
                                            self.cfg.vision, self.rngs["vision"])
        self.track, self.accepted = self.tracker.step(self.obs)

    @property
    def track_state(self) -> TrackState | None:
        return self.track

    def step(self, command: RateCommand) -> TrackState | None:
        cfg = self.cfg
        self.delay.push(command, self.t)
        applied = self.delay.pop(self.t)
        self.robot = step_dynamics(self.robot, applied, cfg.hydro, self.mixer, cfg.sim.dt, cfg.actuator)
        self.target = step_target(self.target, self.rngs["target"], cfg.sim.dt, cfg.target)
        self.t += 1
        self._sense()
        return self.track
