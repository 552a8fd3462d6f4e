import numpy as np
import pytest

from swimtrack.agent import reward
from swimtrack.config import Config
from swimtrack.env import TrackingEnv, rng_streams
from swimtrack.pid import (
    PidGains,
    PidState,
    PidTrackingController,
    TrackingGains,
    TrackLostError,
    gain_grid,
    pid_step,
    pid_tracking_controller,
    tune_gains,
)
from swimtrack.tracker import N_STATE, TrackState


def _track(x_c, y_c, area):
    x = np.zeros(N_STATE)
    x[:3] = x_c, y_c, area
    return TrackState(x, np.eye(N_STATE))


def test_zero_error_gives_zero_output():
    out, _ = pid_step(PidGains(1.0, 1.0, 1.0), PidState(), 0.0, 0.04)
    assert out == 0.0


def test_pure_proportional():
    out, _ = pid_step(PidGains(2.0), PidState(), 0.3, 0.04)
    assert out == pytest.approx(0.6)


def test_derivative_on_ramp():
    gains, state, dt = PidGains(0.0, 0.0, 1.0, output_limit=10.0), PidState(), 0.1
    outs = []
    for k in range(5):
        out, state = pid_step(gains, state, k * dt, dt)
        outs.append(out)
    assert outs[0] == 0.0
    assert outs[1:] == pytest.approx([1.0] * 4)


def test_integral_clamped_and_output_clamped():
    gains, state = PidGains(0.0, 1.0, 0.0, integral_limit=0.2, output_limit=0.1), PidState()
    for _ in range(100):
        out, state = pid_step(gains, state, 1.0, 0.04)
    assert state.integral == pytest.approx(0.2)
    assert out == pytest.approx(0.1)
    # unwinds immediately once the error reverses
    out, state = pid_step(gains, state, -1.0, 0.04)
    assert state.integral == pytest.approx(0.16)


def test_invalid_inputs():
    with pytest.raises(ValueError):
        pid_step(PidGains(1.0), PidState(), 0.1, 0.0)
    with pytest.raises(ValueError):
        PidGains(1.0, integral_limit=0.0)


def test_centered_target_gives_neutral_command():
    gains = TrackingGains.from_config(Config().pid)
    cmd = pid_tracking_controller(_track(0.0, 0.0, gains.area_ref), gains)
    assert cmd == (0.0, 0.0, 0.0)


def test_command_signs():
    gains = TrackingGains.from_config(Config().pid)
    cmd = pid_tracking_controller(_track(0.4, 0.3, 0.01), gains)
    assert cmd.yaw_rate < 0
    assert cmd.pitch_rate < 0
    assert cmd.forward_speed > 0
    cmd = pid_tracking_controller(_track(-0.4, -0.3, 0.2), gains)
    assert cmd.yaw_rate > 0 and cmd.pitch_rate > 0 and cmd.forward_speed < 0


def test_lost_track_raises():
    ctl = PidTrackingController(TrackingGains.from_config(Config().pid), 0.04)
    with pytest.raises(TrackLostError):
        ctl.command(None)


def test_closed_loop_static_target_converges():
    cfg = Config().replace(**{"target.speed_box": "0,0,0"})
    env = TrackingEnv(cfg, rng_streams(0))
    env.target.position = np.array([2.5, -0.6, 0.4])
    env.tracker.reset()
    env._sense()
    ctl = PidTrackingController(TrackingGains.from_config(cfg.pid), cfg.sim.dt)
    for _ in range(300):
        assert env.track is not None
        env.step(ctl.command(env.track))
    assert abs(env.track.x[0]) < 0.05 and abs(env.track.x[1]) < 0.05


def test_tune_single_candidate():
    g = PidGains(1.0)
    assert tune_gains([g], lambda c: 0.0) is g


def test_tune_duplicates_first_wins():
    a, b = PidGains(1.0), PidGains(1.0)
    assert tune_gains([a, b], lambda c: 1.0) is a


def test_tune_empty_rejected():
    with pytest.raises(ValueError):
        tune_gains([], lambda c: 0.0)


def _locked_axis_score(gains, n=250, dt=0.04, tau=0.2, delay=3):
    # first-order heading plant with a short transport delay; positive rate reduces x_c
    heading, rate, pending = 0.0, 0.0, [0.0] * delay
    state, score = PidState(), 0.0
    for _ in range(n):
        x_c = 0.5 - heading
        score += reward(x_c, 0.0)
        cmd, state = pid_step(gains, state, x_c, dt)
        pending.append(cmd)
        rate += (pending.pop(0) - rate) * dt / tau
        heading += rate * dt
    return score / n


def test_tuned_gains_beat_every_rejected_candidate():
    grid = gain_grid([0.2, 1.0, 3.0], [0.0, 0.5], [0.0, 0.05], PidGains(1.0, output_limit=0.5))
    record = []
    best = tune_gains(grid, _locked_axis_score, record)
    assert len(record) == len(grid)
    best_score = _locked_axis_score(best)
    assert all(best_score >= s for c, s in record)
    assert sum(best_score > s for c, s in record) >= len(grid) - 1
