"""Centralized two-head RL controller: features, history window, reward, actions."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from swimtrack.config import AgentConfig
from swimtrack.dqn import QNetwork
from swimtrack.sim.dynamics import RateCommand
from swimtrack.tracker import TrackState

FEATURES_PER_STEP = 6


def reward(x_c: float, y_c: float, mu: float = 0.1, lam: float = 0.1) -> float:
    """Centering reward; 2 at the image center, decaying in |x_c| and |y_c|."""
    return mu / (abs(x_c) + mu) + lam / (abs(y_c) + lam)


def reward_terms(x_c: float, y_c: float, mu: float = 0.1, lam: float = 0.1) -> tuple[float, float]:
    """The yaw (x) and pitch (y) halves of :func:`reward`."""
    return mu / (abs(x_c) + mu), lam / (abs(y_c) + lam)


def reward_with_confidence(x_c: float, y_c: float, c_d: float, mu: float = 0.1, lam: float = 0.1,
                           beta: float = 0.0) -> float:
    if beta < 0:
        raise ValueError("beta must be >= 0")
    return reward(x_c, y_c, mu, lam) + beta * c_d


class StepFeatures(NamedTuple):
    x: float
    y: float
    area: float
    v_l: float
    yaw_prev: float
    pitch_prev: float


NEUTRAL_FEATURES = StepFeatures(0.0, 0.0, 0.0, 0.0, 0.0, 0.0)


def lost_view(last_x: float, last_y: float) -> tuple[float, float]:
    """Image position reported while the track is LOST: the image edge on
    the side the target left through."""
    return float(np.sign(last_x) or 1.0), float(np.sign(last_y) or 1.0)


def make_features(track: TrackState | None, last_cmd: RateCommand, cfg: AgentConfig,
                  lost_xy: tuple[float, float] = (1.0, 1.0)) -> StepFeatures:
    """Normalized per-step features from tracker output and own commands only."""
    if track is None:
        x, y, area = lost_xy[0], lost_xy[1], 0.0
    else:
        x = min(1.0, max(-1.0, float(track.x[0])))
        y = min(1.0, max(-1.0, float(track.x[1])))
        area = max(0.0, float(track.x[2]))
    return StepFeatures(
        x,
        y,
        area / cfg.area_scale,
        last_cmd.forward_speed / cfg.speed_scale,
        last_cmd.yaw_rate / cfg.max_rate,
        last_cmd.pitch_rate / cfg.max_rate,
    )


class AugmentedState:
    """Sliding window of the last H step features, flattened oldest first."""

    def __init__(self, history: int, fill: StepFeatures = NEUTRAL_FEATURES):
        if history <= 0:
            raise ValueError("history must be positive")
        self.history = history
        self.window: deque[StepFeatures] = deque([fill] * history, maxlen=history)

    def push(self, f: StepFeatures) -> "AugmentedState":
        self.window.append(f)
        return self

    def vector(self) -> np.ndarray:
        return np.asarray(self.window, dtype=np.float64).reshape(-1)

    def __len__(self) -> int:
        return len(self.window)


push_features = AugmentedState.push


@dataclass(frozen=True)
class ActionGrid:
    yaw_levels: np.ndarray
    pitch_levels: np.ndarray

    @classmethod
    def symmetric(cls, k_yaw: int, k_pitch: int, max_rate: float) -> "ActionGrid":
        if k_yaw % 2 == 0 or k_pitch % 2 == 0:
            raise ValueError("level counts must be odd so zero is a level")
        return cls(np.linspace(-max_rate, max_rate, k_yaw), np.linspace(-max_rate, max_rate, k_pitch))

    @classmethod
    def from_config(cls, cfg: AgentConfig) -> "ActionGrid":
        return cls.symmetric(cfg.yaw_levels, cfg.pitch_levels, cfg.max_rate)

    def quantize(self, yaw_rate: float, pitch_rate: float) -> tuple[int, int]:
        """Nearest level per head (lower index on exact ties)."""
        return (int(np.argmin(np.abs(self.yaw_levels - yaw_rate))),
                int(np.argmin(np.abs(self.pitch_levels - pitch_rate))))

    def rates(self, yaw_idx: int, pitch_idx: int) -> tuple[float, float]:
        return float(self.yaw_levels[yaw_idx]), float(self.pitch_levels[pitch_idx])


def select_action(net: QNetwork, s: np.ndarray, epsilon: float, grid: ActionGrid,
                  rng: np.random.Generator, forward_speed: float = 0.0) -> tuple[int, int, RateCommand]:
    """Per-head epsilon-greedy choice; greedy ties go to the lowest index."""
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must lie in [0, 1]")
    q_yaw, q_pitch = net.forward(s)
    if epsilon > 0 and rng.random() < epsilon:
        yaw_idx = int(rng.integers(len(grid.yaw_levels)))
    else:
        yaw_idx = int(np.argmax(q_yaw))
    if epsilon > 0 and rng.random() < epsilon:
        pitch_idx = int(rng.integers(len(grid.pitch_levels)))
    else:
        pitch_idx = int(np.argmax(q_pitch))
    yaw, pitch = grid.rates(yaw_idx, pitch_idx)
    return yaw_idx, pitch_idx, RateCommand(forward_speed, yaw, pitch)
