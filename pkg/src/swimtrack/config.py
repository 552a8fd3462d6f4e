"""Configuration dataclasses and the flat ``section.key=value`` text format.

Every tunable in the package lives in one of the section dataclasses below.
A config file is plain text, one assignment per line::

    # comments and blank lines are ignored
    hydro.rho=1000
    hydro.drag_coeffs=0.9,1.2,1.2
    sim.delay_steps=10

Vectors are comma separated. Unknown keys raise ``ConfigError``.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any


class ConfigError(ValueError):
    """Raised for malformed or inconsistent configuration."""


@dataclass
class HydroParams:
    rho: float = 1000.0
    drag_coeffs: tuple[float, float, float] = (0.9, 1.2, 1.2)
    ref_areas: tuple[float, float, float] = (0.04, 0.12, 0.20)
    mass: float = 10.0
    g: float = 9.81
    b_coef: float = 1.0
    angular_damping: tuple[float, float, float] = (1.0, 1.5, 1.5)
    inertia: tuple[float, float, float] = (0.2, 0.4, 0.4)
    current: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def validate(self) -> None:
        if self.rho <= 0 or self.mass <= 0 or self.g <= 0:
            raise ConfigError("hydro: rho, mass and g must be positive")
        if min(self.ref_areas) < 0 or min(self.drag_coeffs) < 0:
            raise ConfigError("hydro: drag coefficients and areas must be >= 0")
        if min(self.inertia) <= 0 or min(self.angular_damping) < 0:
            raise ConfigError("hydro: inertia must be positive, damping >= 0")


@dataclass
class ActuatorParams:
    """Inner rate loops, actuator limits and leg geometry."""

    k_forward: float = 40.0
    k_yaw: float = 4.0
    k_pitch: float = 4.0
    k_roll: float = 3.0
    k_roll_rate: float = 1.0
    max_forward_speed: float = 0.8
    max_yaw_rate: float = 0.6
    max_pitch_rate: float = 0.6
    leg_max_thrust: float = 15.0
    leg_health: tuple[float, ...] = (1.0, 1.0, 1.0, 1.0, 1.0, 1.0)
    v_max: float = 1.5

    def validate(self) -> None:
        if len(self.leg_health) != 6:
            raise ConfigError("actuator.leg_health needs six entries")
        if any(h < 0 or h > 1 for h in self.leg_health):
            raise ConfigError("actuator.leg_health entries must lie in [0, 1]")
        if self.v_max <= 0 or self.leg_max_thrust <= 0:
            raise ConfigError("actuator: v_max and leg_max_thrust must be positive")


@dataclass
class SimConfig:
    dt: float = 0.04
    delay_steps: int = 10
    start_distance: float = 2.5

    def validate(self) -> None:
        if self.dt <= 0:
            raise ConfigError("sim.dt must be positive")
        if self.delay_steps < 0:
            raise ConfigError("sim.delay_steps must be >= 0")


@dataclass
class TargetConfig:
    speed_box: tuple[float, float, float] = (0.4, 0.4, 0.4)
    t_min: int = 50
    t_max: int = 250
    v_max: float = 0.7

    def validate(self) -> None:
        if self.t_min < 1 or self.t_max < self.t_min:
            raise ConfigError("target: need 1 <= t_min <= t_max")


@dataclass
class VisionConfig:
    horizontal_fov: float = 1.5708
    vertical_fov: float = 1.2
    target_radius: float = 0.3
    max_range: float = 8.0
    center_sigma: float = 0.01
    area_sigma: float = 0.002
    base_confidence: float = 0.9
    left_bias_strength: float = 0.0
    confidence_sigma: float = 0.03
    p_drop: float = 0.3

    def validate(self) -> None:
        if not (0 < self.horizontal_fov < 3.14 and 0 < self.vertical_fov < 3.14):
            raise ConfigError("vision: fov must lie in (0, pi)")
        if self.max_range <= 0 or self.target_radius <= 0:
            raise ConfigError("vision: max_range and target_radius must be positive")


@dataclass
class TrackerConfig:
    q_position: float = 1e-4
    q_velocity: float = 1e-2
    r_center: float = 0.01
    r_area: float = 0.002
    r_aspect: float = 0.01
    r_confidence: float = 0.05
    p0_position: float = 0.1
    p0_velocity: float = 1.0
    iou_min: float = 0.1
    max_coast: int = 12

    def validate(self) -> None:
        if min(self.r_center, self.r_area, self.r_aspect, self.r_confidence) <= 0:
            raise ConfigError("tracker: measurement sigmas must be positive")
        if self.max_coast < 0:
            raise ConfigError("tracker.max_coast must be >= 0")


@dataclass
class PidConfig:
    yaw_kp: float = 0.8
    yaw_ki: float = 0.2
    yaw_kd: float = 0.05
    pitch_kp: float = 0.8
    pitch_ki: float = 0.2
    pitch_kd: float = 0.05
    fwd_kp: float = 6.0
    fwd_ki: float = 0.5
    fwd_kd: float = 0.0
    integral_limit: float = 0.5
    rate_limit: float = 0.5
    speed_limit: float = 0.6
    area_ref: float = 0.05


@dataclass
class DqnConfig:
    hidden: tuple[int, ...] = (128, 128)
    eta: float = 1e-5
    gamma: float = 0.99
    tau: float = 0.001
    batch_size: int = 50
    erm_size: int = 2000
    optimizer: str = "sgd"
    reward_scale: float = 1.0
    init_seed: int = 0

    def validate(self) -> None:
        if not 0 < self.gamma < 1:
            raise ConfigError("dqn.gamma must lie in (0, 1)")
        if not 0 < self.tau <= 1:
            raise ConfigError("dqn.tau must lie in (0, 1]")
        if self.eta <= 0:
            raise ConfigError("dqn.eta must be positive")
        if self.optimizer not in ("sgd", "adam"):
            raise ConfigError("dqn.optimizer must be 'sgd' or 'adam'")
        if self.batch_size < 1 or self.erm_size < self.batch_size:
            raise ConfigError("dqn: need 1 <= batch_size <= erm_size")


@dataclass
class AgentConfig:
    history: int = 20
    yaw_levels: int = 7
    pitch_levels: int = 7
    max_rate: float = 0.5
    mu: float = 0.1
    lam: float = 0.1
    beta: float = 0.0
    epsilon: float = 0.05
    area_scale: float = 0.1
    speed_scale: float = 0.6

    def validate(self) -> None:
        if self.history <= 0:
            raise ConfigError("agent.history must be positive")
        if self.yaw_levels < 1 or self.pitch_levels < 1:
            raise ConfigError("agent: action grids need at least one level")
        if self.yaw_levels % 2 == 0 or self.pitch_levels % 2 == 0:
            raise ConfigError("agent: level counts must be odd so zero is included")
        if self.mu <= 0 or self.lam <= 0 or self.beta < 0:
            raise ConfigError("agent: mu, lam must be > 0 and beta >= 0")
        if not 0 <= self.epsilon <= 1:
            raise ConfigError("agent.epsilon must lie in [0, 1]")


@dataclass
class CurriculumConfig:
    min_prefill: int = 2000
    outer_start: float = 0.2
    decay_steps: int = 100_000
    random_action_prob: float = 0.3
    setpoint_min: int = 100
    setpoint_max: int = 300
    setpoint_box: float = 0.6
    spiral_r0: float = 0.05
    spiral_c: float = 0.02
    spiral_dtheta: float = 0.04
    spiral_gain: float = 1.0
    search_speed: float = 0.1
    search_budget: int = 1000


@dataclass
class TrialConfig:
    scenario: str = "nominal"
    controller: str = "PID"
    seed: int = 0
    max_frames: int = 45_000
    train_steps: int = 0
    online_updates: bool = False
    checkpoint: str = ""
    metric_gamma: float = 0.99
    steady_skip: int = 0
    eval_epsilon: float = 0.0  # exploration kept by a frozen RL policy

    def validate(self) -> None:
        if not 0.0 <= self.eval_epsilon <= 1.0:
            raise ConfigError("trial.eval_epsilon must be in [0, 1]")
        if self.max_frames <= 0:
            raise ConfigError("trial.max_frames must be positive")
        if self.controller not in ("PID", "RL", "CURRICULUM"):
            raise ConfigError("trial.controller must be PID, RL or CURRICULUM")
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}")


@dataclass
class Config:
    hydro: HydroParams = field(default_factory=HydroParams)
    actuator: ActuatorParams = field(default_factory=ActuatorParams)
    sim: SimConfig = field(default_factory=SimConfig)
    target: TargetConfig = field(default_factory=TargetConfig)
    vision: VisionConfig = field(default_factory=VisionConfig)
    tracker: TrackerConfig = field(default_factory=TrackerConfig)
    pid: PidConfig = field(default_factory=PidConfig)
    dqn: DqnConfig = field(default_factory=DqnConfig)
    agent: AgentConfig = field(default_factory=AgentConfig)
    curriculum: CurriculumConfig = field(default_factory=CurriculumConfig)
    trial: TrialConfig = field(default_factory=TrialConfig)

    def validate(self) -> "Config":
        for f in dataclasses.fields(self):
            section = getattr(self, f.name)
            check = getattr(section, "validate", None)
            if check is not None:
                check()
        return self

    def replace(self, **overrides: Any) -> "Config":
        """Return a deep copy with ``section.key`` overrides applied."""
        out = parse_config(dump_config(self))
        for key, value in overrides.items():
            _assign(out, key.replace("__", "."), value)
        return out

    def with_scenario(self, name: str) -> "Config":
        out = self.replace()
        apply_scenario(out, name)
        return out


# Scenario presets: overrides applied on top of a base config.
SCENARIOS: dict[str, dict[str, Any]] = {
    "nominal": {},
    "high_damping_negative_buoyancy": {
        "hydro.angular_damping": (4.0, 6.0, 6.0),
        "hydro.b_coef": 0.97,
    },
    "right_rear_leg_fault": {
        "actuator.leg_health": (1.0, 1.0, 1.0, 1.0, 1.0, 0.0),
    },
}


def apply_scenario(cfg: Config, name: str) -> Config:
    if name not in SCENARIOS:
        raise ConfigError(f"unknown scenario {name!r}")
    for key, value in SCENARIOS[name].items():
        _assign(cfg, key, value)
    cfg.trial.scenario = name
    return cfg


def _convert(raw: Any, default: Any, key: str) -> Any:
    if isinstance(default, bool):
        if isinstance(raw, bool):
            return raw
        text = str(raw).strip().lower()
        if text in ("1", "true", "yes", "on"):
            return True
        if text in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {raw!r}")
    if isinstance(default, tuple):
        items = raw if isinstance(raw, (tuple, list)) else [s for s in str(raw).split(",") if s.strip()]
        kind = type(default[0]) if default else float
        try:
            return tuple(kind(float(x)) if kind is int else kind(x) for x in items)
        except ValueError as exc:
            raise ConfigError(f"{key}: bad vector {raw!r}") from exc
    try:
        if isinstance(default, int):
            value = float(raw)
            if value != int(value):
                raise ConfigError(f"{key}: expected an integer, got {raw!r}")
            return int(value)
        if isinstance(default, float):
            return float(raw)
    except ValueError as exc:
        raise ConfigError(f"{key}: cannot parse {raw!r}") from exc
    return str(raw).strip()


def _assign(cfg: Config, key: str, raw: Any) -> None:
    section_name, _, name = key.partition(".")
    section = getattr(cfg, section_name, None)
    if section is None or not name or not dataclasses.is_dataclass(section):
        raise ConfigError(f"unknown config section in {key!r}")
    if name not in {f.name for f in dataclasses.fields(section)}:
        raise ConfigError(f"unknown config key {key!r}")
    setattr(section, name, _convert(raw, getattr(section, name), key))


def parse_config(text: str, base: Config | None = None) -> Config:
    cfg = base if base is not None else Config()
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key == "trial.scenario":
            apply_scenario(cfg, value)
            continue
        _assign(cfg, key, value)
    return cfg


def load_config(path: str | Path) -> Config:
    return parse_config(Path(path).read_text()).validate()


def _fmt(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(_fmt(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def dump_config(cfg: Config) -> str:
    # scenario first: its preset is applied on parse, explicit keys then win
    lines = [f"trial.scenario={cfg.trial.scenario}"]
    for f in dataclasses.fields(cfg):
        section = getattr(cfg, f.name)
        for g in dataclasses.fields(section):
            if f.name == "trial" and g.name == "scenario":
                continue
            lines.append(f"{f.name}.{g.name}={_fmt(getattr(section, g.name))}")
    return "\n".join(lines) + "\n"
