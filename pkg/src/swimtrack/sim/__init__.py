from swimtrack.sim.delay import DelayLine
from swimtrack.sim.dynamics import (
    NEUTRAL_COMMAND,
    LegMixer,
    RateCommand,
    RobotState,
    SimulationFault,
    apply_rate_command,
    step_dynamics,
)
from swimtrack.sim.target import TargetState, step_target

__all__ = [
    "DelayLine",
    "LegMixer",
    "NEUTRAL_COMMAND",
    "RateCommand",
    "RobotState",
    "SimulationFault",
    "TargetState",
    "apply_rate_command",
    "step_dynamics",
    "step_target",
]
