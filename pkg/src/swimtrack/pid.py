"""Decentralized PID baseline and its discrete gain search."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from typing import Callable, Iterable, Sequence

from swimtrack.config import PidConfig
from swimtrack.sim.dynamics import RateCommand
from swimtrack.tracker import TrackState


class TrackLostError(RuntimeError):
    """A controller that needs a live track was handed a LOST one."""


@dataclass(frozen=True)
class PidGains:
    kp: float
    ki: float = 0.0
    kd: float = 0.0
    integral_limit: float = 1.0
    output_limit: float = 1.0

    def __post_init__(self):
        if self.integral_limit <= 0 or self.output_limit <= 0:
            raise ValueError("PID limits must be positive")


@dataclass(frozen=True)
class PidState:
    integral: float = 0.0
    prev_error: float = 0.0
    initialized: bool = False


def pid_step(gains: PidGains, state: PidState, error: float, dt: float) -> tuple[float, PidState]:
    if dt <= 0:
        raise ValueError("dt must be positive")
    lim = gains.integral_limit
    # clamping anti-windup on the accumulated error
    integral = min(lim, max(-lim, state.integral + error * dt))
    derivative = (error - state.prev_error) / dt if state.initialized else 0.0
    raw = gains.kp * error + gains.ki * integral + gains.kd * derivative
    out = min(gains.output_limit, max(-gains.output_limit, raw))
    return out, PidState(integral, error, True)


@dataclass(frozen=True)
class TrackingGains:
    yaw: PidGains
    pitch: PidGains
    forward: PidGains
    area_ref: float = 0.05

    @classmethod
    def from_config(cls, cfg: PidConfig) -> "TrackingGains":
        return cls(
            PidGains(cfg.yaw_kp, cfg.yaw_ki, cfg.yaw_kd, cfg.integral_limit, cfg.rate_limit),
            PidGains(cfg.pitch_kp, cfg.pitch_ki, cfg.pitch_kd, cfg.integral_limit, cfg.rate_limit),
            PidGains(cfg.fwd_kp, cfg.fwd_ki, cfg.fwd_kd, cfg.integral_limit, cfg.speed_limit),
            cfg.area_ref,
        )


class PidTrackingController:
    """Three independent loops: yaw on x_c, pitch on y_c, speed on box area.

    With body y to the left and z up, a target right of center (x_c > 0)
    needs a negative yaw rate and a target above center (y_c > 0) a
    negative pitch rate; both loops therefore act on ``-x_c`` and ``-y_c``.
    """

    def __init__(self, gains: TrackingGains, dt: float):
        self.gains = gains
        self.dt = dt
        self.reset()

    def reset(self) -> None:
        self.yaw_state = PidState()
        self.pitch_state = PidState()
        self.fwd_state = PidState()

    def command(self, track: TrackState | None, setpoint: tuple[float, float] = (0.0, 0.0)) -> RateCommand:
        if track is None:
            raise TrackLostError("PID tracking needs a live track")
        x_c, y_c, area = track.x[0], track.x[1], track.x[2]
        g = self.gains
        yaw, self.yaw_state = pid_step(g.yaw, self.yaw_state, setpoint[0] - x_c, self.dt)
        pitch, self.pitch_state = pid_step(g.pitch, self.pitch_state, setpoint[1] - y_c, self.dt)
        fwd, self.fwd_state = pid_step(g.forward, self.fwd_state, g.area_ref - area, self.dt)
        return RateCommand(float(fwd), float(yaw), float(pitch))

    def forward_only(self, track: TrackState | None) -> float:
        """Advance just the speed loop (used when another policy steers)."""
        if track is None:
            raise TrackLostError("PID tracking needs a live track")
        g = self.gains
        fwd, self.fwd_state = pid_step(g.forward, self.fwd_state, g.area_ref - track.x[2], self.dt)
        return float(fwd)


def pid_tracking_controller(track: TrackState | None, gains3: TrackingGains, dt: float = 0.04) -> RateCommand:
    """Stateless single-shot form (fresh PID state on every call)."""
    return PidTrackingController(gains3, dt).command(track)


def gain_grid(kp: Sequence[float], ki: Sequence[float], kd: Sequence[float], base: PidGains) -> list[PidGains]:
    return [replace(base, kp=p, ki=i, kd=d) for p, i, d in itertools.product(kp, ki, kd)]


def tune_gains(
    candidates: Iterable,
    evaluate: Callable[[object], float],
    record: list | None = None,
):
    """Exhaustive search: score every candidate, return the best.

    ``evaluate`` runs one fixed-seed trial and returns its score (higher is
    better). Ties keep the earliest candidate. Scores are appended to
    ``record`` as ``(candidate, score)`` pairs when given.
    """
    candidates = list(candidates)
    if not candidates:
        raise ValueError("tune_gains needs at least one candidate")
    best, best_score = None, float("-inf")
    for cand in candidates:
        score = float(evaluate(cand))
        if record is not None:
            record.append((cand, score))
        if best is None or score > best_score:
            best, best_score = cand, score
    return best
