"""Rigid-body model of a six-legged swimming robot.

Frames: world z points up. Body x points forward (camera axis), body y to
the left, body z up. Orientation is a unit quaternion ``(w, x, y, z)`` that
rotates body vectors into the world frame.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from swimtrack.config import ActuatorParams, HydroParams


class SimulationFault(FloatingPointError):
    """Integration produced a non-finite quantity."""

    def __init__(self, quantity: str, value):
        super().__init__(f"non-finite {quantity}: {value!r}")
        self.quantity = quantity
        self.value = value


class RateCommand(NamedTuple):
    forward_speed: float = 0.0
    yaw_rate: float = 0.0
    pitch_rate: float = 0.0


NEUTRAL_COMMAND = RateCommand(0.0, 0.0, 0.0)


@dataclass
class RobotState:
    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    orientation: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0, 0.0]))
    linear_velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    angular_velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    leg_thrusts: np.ndarray = field(default_factory=lambda: np.zeros(6))

    def copy(self) -> "RobotState":
        return RobotState(
            self.position.copy(),
            self.orientation.copy(),
            self.linear_velocity.copy(),
            self.angular_velocity.copy(),
            self.leg_thrusts.copy(),
        )

    def rotation(self) -> np.ndarray:
        return quat_to_matrix(self.orientation)


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def quat_from_euler(roll: float, pitch: float, yaw: float) -> np.ndarray:
    """ZYX convention: yaw about world z, then pitch, then roll."""
    cr, sr = math.cos(roll / 2), math.sin(roll / 2)
    cp, sp = math.cos(pitch / 2), math.sin(pitch / 2)
    cy, sy = math.cos(yaw / 2), math.sin(yaw / 2)
    return np.array(
        [
            cr * cp * cy + sr * sp * sy,
            sr * cp * cy - cr * sp * sy,
            cr * sp * cy + sr * cp * sy,
            cr * cp * sy - sr * sp * cy,
        ]
    )


def quat_to_euler(q: np.ndarray) -> tuple[float, float, float]:
    w, x, y, z = q
    roll = math.atan2(2 * (w * x + y * z), 1 - 2 * (x * x + y * y))
    pitch = math.asin(max(-1.0, min(1.0, 2 * (w * y - z * x))))
    yaw = math.atan2(2 * (w * z + x * y), 1 - 2 * (y * y + z * z))
    return roll, pitch, yaw


def _integrate_quat(q: np.ndarray, omega: np.ndarray, dt: float) -> np.ndarray:
    # right-multiply by the body-rate rotation, then renormalize
    angle = math.sqrt(omega[0] ** 2 + omega[1] ** 2 + omega[2] ** 2) * dt
    if angle < 1e-12:
        return q / np.linalg.norm(q)
    axis = omega * (dt / angle)
    s = math.sin(angle / 2)
    dw, dx, dy, dz = math.cos(angle / 2), axis[0] * s, axis[1] * s, axis[2] * s
    w, x, y, z = q
    out = np.array(
        [
            w * dw - x * dx - y * dy - z * dz,
            w * dx + x * dw + y * dz - z * dy,
            w * dy - x * dz + y * dw + z * dx,
            w * dz + x * dy - y * dx + z * dw,
        ]
    )
    return out / np.linalg.norm(out)


# Leg layout: front/middle/rear pairs, left then right.
LEG_NAMES = ("front_left", "front_right", "middle_left", "middle_right", "rear_left", "rear_right")
LEG_POSITIONS = np.array(
    [[0.25, 0.15, 0.0], [0.25, -0.15, 0.0], [0.0, 0.18, 0.0], [0.0, -0.18, 0.0], [-0.25, 0.15, 0.0], [-0.25, -0.15, 0.0]]
)
# flipper tilt (rad) of each leg's thrust line out of the body x-y plane
LEG_TILTS = np.array([0.5, -0.5, -0.5, 0.5, 0.5, -0.5])


def leg_geometry() -> np.ndarray:
    """5x6 map from leg thrusts to (Fx, yaw, pitch, roll torque, Fz)."""
    dirs = np.stack([np.cos(LEG_TILTS), np.zeros(6), np.sin(LEG_TILTS)], axis=1)
    torques = np.cross(LEG_POSITIONS, dirs)
    return np.stack([dirs[:, 0], torques[:, 2], torques[:, 1], torques[:, 0], dirs[:, 2]])


class LegMixer:
    """Allocates generalized forces to six leg thrusts, with per-leg health."""

    def __init__(self, leg_health=(1.0,) * 6, max_thrust: float = 15.0):
        self.geometry = leg_geometry()
        # commanding Fz = 0 keeps heave out of the allocation
        self.mixing_matrix = np.linalg.pinv(self.geometry)[:, :4]
        self.leg_health = np.asarray(leg_health, dtype=float)
        self.max_thrust = float(max_thrust)
        # per-leg additive command perturbation (fault-injection hook)
        self.command_offsets = np.zeros(6)

    @classmethod
    def from_params(cls, act: ActuatorParams) -> "LegMixer":
        return cls(act.leg_health, act.leg_max_thrust)

    def leg_thrusts(self, generalized: np.ndarray) -> np.ndarray:
        demand = self.mixing_matrix @ np.asarray(generalized, dtype=float) + self.command_offsets
        return np.clip(demand, -self.max_thrust, self.max_thrust) * self.leg_health

    def realized(self, thrusts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Body force (3,) and torque (3,) produced by the given leg thrusts."""
        fx, tz, ty, tx, fz = self.geometry @ thrusts
        return np.array([fx, 0.0, fz]), np.array([tx, ty, tz])


def apply_rate_command(
    state: RobotState, command: RateCommand, act: ActuatorParams, hydro: HydroParams
) -> np.ndarray:
    """Inner loops: commanded rates to (forward_thrust, yaw, pitch, roll torque)."""
    v_cmd = min(max(command.forward_speed, -act.max_forward_speed), act.max_forward_speed)
    r_cmd = min(max(command.yaw_rate, -act.max_yaw_rate), act.max_yaw_rate)
    q_cmd = min(max(command.pitch_rate, -act.max_pitch_rate), act.max_pitch_rate)
    u = state.linear_velocity[0]
    p, q, r = state.angular_velocity
    k_drag = 0.5 * hydro.rho * hydro.drag_coeffs[0] * hydro.ref_areas[0]
    thrust = act.k_forward * (v_cmd - u) + k_drag * v_cmd * abs(v_cmd)
    yaw_torque = act.k_yaw * (r_cmd - r)
    pitch_torque = act.k_pitch * (q_cmd - q)
    roll, _, _ = quat_to_euler(state.orientation)
    roll_torque = -act.k_roll * roll - act.k_roll_rate * p
    return np.array([thrust, yaw_torque, pitch_torque, roll_torque])


def drag_force(v_rel_body: np.ndarray, hydro: HydroParams) -> np.ndarray:
    """Quadratic drag per local axis, opposing the relative velocity."""
    coef = 0.5 * hydro.rho * np.asarray(hydro.drag_coeffs) * np.asarray(hydro.ref_areas)
    return -coef * v_rel_body * np.abs(v_rel_body)


def buoyancy_force(hydro: HydroParams) -> float:
    """Net vertical force in the world frame; b_coef = 1 is neutral."""
    return hydro.mass * hydro.g * (hydro.b_coef - 1.0)


def step_dynamics(
    state: RobotState,
    command: RateCommand,
    params: HydroParams,
    mixer: LegMixer,
    dt: float,
    act: ActuatorParams | None = None,
) -> RobotState:
    """Advance the robot by ``dt`` with semi-implicit Euler."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    act = act or ActuatorParams()
    R = quat_to_matrix(state.orientation)

    generalized = apply_rate_command(state, command, act, params)
    thrusts = mixer.leg_thrusts(generalized)
    force_b, torque_b = mixer.realized(thrusts)

    v_world = R @ state.linear_velocity
    v_rel = R.T @ (v_world - np.asarray(params.current))
    force_b = force_b + drag_force(v_rel, params)
    force_w = R @ force_b
    force_w[2] += buoyancy_force(params)

    v_world = v_world + force_w * (dt / params.mass)
    speed = np.linalg.norm(v_world)
    if speed > act.v_max:
        v_world *= act.v_max / speed

    omega = state.angular_velocity
    inertia = np.asarray(params.inertia)
    damping = np.asarray(params.angular_damping)
    omega = omega + (torque_b - damping * omega) * (dt / inertia)

    position = state.position + v_world * dt
    orientation = _integrate_quat(state.orientation, omega, dt)
    v_body = quat_to_matrix(orientation).T @ v_world

    for name, value in (("position", position), ("velocity", v_body), ("angular_velocity", omega), ("orientation", orientation)):
        if not np.all(np.isfinite(value)):
            raise SimulationFault(name, value)
    return RobotState(position, orientation, v_body, omega, thrusts)
