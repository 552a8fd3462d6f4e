from collections import deque

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from swimtrack.agent import (
    NEUTRAL_FEATURES,
    ActionGrid,
    AugmentedState,
    StepFeatures,
    lost_view,
    make_features,
    reward,
    reward_with_confidence,
    select_action,
)
from swimtrack.config import AgentConfig
from swimtrack.dqn import QNetwork
from swimtrack.sim import NEUTRAL_COMMAND, DelayLine, RateCommand
from swimtrack.tracker import N_STATE, TrackState

GRID = ActionGrid.symmetric(7, 7, 0.5)


def _fixed_q(q_yaw, q_pitch):
    net = QNetwork(1, (1,), len(q_yaw), len(q_pitch), theta=np.zeros(QNetwork(1, (1,), len(q_yaw), len(q_pitch)).size))
    net.head_yaw[1][...] = q_yaw
    net.head_pitch[1][...] = q_pitch
    return net


def test_reward_examples():
    assert reward(0.0, 0.0) == 2.0
    assert reward(0.1, 0.1, 0.1, 0.1) == pytest.approx(1.0, abs=1e-12)
    assert reward(0.9, 0.0, 0.1, 0.1) == pytest.approx(1.1, abs=1e-12)


def test_reward_matches_direct_formula():
    rng = np.random.default_rng(0)
    for _ in range(10000):
        x, y = rng.uniform(-1, 1, 2)
        mu, lam = rng.uniform(0.01, 1, 2)
        assert abs(reward(x, y, mu, lam) - (mu / (abs(x) + mu) + lam / (abs(y) + lam))) <= 1e-12


@settings(max_examples=200)
@given(st.floats(-1e6, 1e6), st.floats(-1e6, 1e6))
def test_reward_bounds(x, y):
    assert 0 < reward(x, y) <= 2


@settings(max_examples=200)
@given(st.floats(-10, 10), st.floats(-10, 10), st.floats(1e-6, 1))
def test_reward_strictly_decreasing_per_axis(x, y, d):
    r = reward(x, y)
    assert reward(abs(x) + d, y) < r
    assert reward(x, abs(y) + d) < r


def test_confidence_reward():
    assert reward_with_confidence(0.3, -0.2, 0.7, beta=0.0) == reward(0.3, -0.2)
    assert reward_with_confidence(0.0, 0.0, 1.0, beta=0.5) == pytest.approx(2.5)
    assert reward_with_confidence(0.3, 0.2, 0.0, beta=3.0) == reward(0.3, 0.2)
    with pytest.raises(ValueError):
        reward_with_confidence(0.0, 0.0, 1.0, beta=-0.1)


def test_window_keeps_last_h_in_order():
    w = AugmentedState(3)
    feats = [StepFeatures(k, 0, 0, 0, 0, 0) for k in range(5)]
    for f in feats:
        w.push(f)
    assert list(w.window) == feats[-3:]
    assert len(w) == 3


def test_window_prefilled_with_neutral_features():
    assert np.array_equal(AugmentedState(4).vector(), np.zeros(24))
    assert list(AugmentedState(2).window) == [NEUTRAL_FEATURES] * 2


def test_flattening_layout():
    w = AugmentedState(2)
    w.push(StepFeatures(1, 2, 3, 4, 5, 6)).push(StepFeatures(7, 8, 9, 10, 11, 12))
    np.testing.assert_array_equal(w.vector(), np.arange(1, 13))


@settings(max_examples=50)
@given(st.integers(1, 30), st.lists(st.floats(-1, 1), max_size=60))
def test_window_matches_deque_oracle(h, values):
    w = AugmentedState(h)
    ref = [0.0] * (6 * h)
    for v in values:
        w.push(StepFeatures(v, -v, v, v, v, v))
        ref = ref[6:] + [v, -v, v, v, v, v]
    np.testing.assert_array_equal(w.vector(), np.array(ref))


def test_make_features_normalization_and_lost_view():
    cfg = AgentConfig()
    x = np.zeros(N_STATE)
    x[:3] = 1.4, -0.2, 0.05
    f = make_features(TrackState(x, np.eye(N_STATE)), RateCommand(0.3, 0.25, -0.5), cfg)
    assert f == StepFeatures(1.0, -0.2, 0.05 / cfg.area_scale, 0.3 / cfg.speed_scale, 0.5, -1.0)
    assert lost_view(-0.4, 0.0) == (-1.0, 1.0)
    f = make_features(None, NEUTRAL_COMMAND, cfg, lost_xy=(-1.0, 1.0))
    assert (f.x, f.y, f.area) == (-1.0, 1.0, 0.0)


def test_greedy_argmax_and_ties():
    rng = np.random.default_rng(0)
    grid = ActionGrid.symmetric(3, 3, 0.5)
    yi, pi, cmd = select_action(_fixed_q([0.1, 0.9, 0.3], [1.0, 1.0, 1.0]), np.zeros(1), 0.0, grid, rng, 0.2)
    assert (yi, pi) == (1, 0)
    assert cmd == RateCommand(0.2, 0.0, -0.5)


def test_argmax_invariant_to_head_offset():
    rng = np.random.default_rng(1)
    for _ in range(100):
        qy, qp = rng.normal(size=7), rng.normal(size=7)
        c = rng.normal() * 10
        a = select_action(_fixed_q(qy, qp), np.zeros(1), 0.0, GRID, rng)[:2]
        b = select_action(_fixed_q(qy + c, qp), np.zeros(1), 0.0, GRID, rng)[:2]
        assert a == b


def test_epsilon_one_is_uniform():
    rng = np.random.default_rng(2)
    net = _fixed_q(np.arange(7.0), np.arange(7.0))
    n = 100_000
    counts = np.zeros((2, 7))
    for _ in range(n):
        yi, pi, _ = select_action(net, np.zeros(1), 1.0, GRID, rng)
        counts[0, yi] += 1
        counts[1, pi] += 1
    assert np.abs(counts / n - 1 / 7).max() < 0.02
    for head in counts:
        assert stats.chisquare(head).pvalue > 1e-3


def test_epsilon_out_of_range():
    with pytest.raises(ValueError):
        select_action(_fixed_q([0.0], [0.0]), np.zeros(1), 1.5, ActionGrid.symmetric(1, 1, 0.5),
                      np.random.default_rng(0))


def test_grid_layout_and_quantize():
    np.testing.assert_allclose(GRID.yaw_levels, np.linspace(-0.5, 0.5, 7))
    assert GRID.quantize(0.0, 0.0) == (3, 3)
    assert GRID.quantize(10.0, -10.0) == (6, 0)
    with pytest.raises(ValueError):
        ActionGrid.symmetric(6, 7, 0.5)


def _contains_in_flight(history, delay, steps=200, seed=0):
    """Whether every command still affecting the robot is visible in the window."""
    rng = np.random.default_rng(seed)
    cfg = AgentConfig(history=history)
    line, window = DelayLine(delay), AugmentedState(history)
    issued = []
    last = NEUTRAL_COMMAND
    ok = True
    for t in range(steps):
        window.push(make_features(None, last, cfg))
        visible = {round(f.yaw_prev * cfg.max_rate, 12) for f in window.window}
        # the applied command plus everything queued behind it
        in_flight = issued[max(0, t - delay - 1):t]
        if t >= delay + 1:
            ok &= all(round(c.yaw_rate, 12) in visible for c in in_flight)
        cmd = RateCommand(0.0, float(rng.uniform(-0.5, 0.5)), 0.0)
        line.push(cmd, t)
        line.pop(t)
        issued.append(cmd)
        last = cmd
        assert len(line.queue) <= delay
    return ok


@pytest.mark.parametrize("delay", [0, 3, 10])
def test_window_longer_than_delay_holds_all_in_flight_actions(delay):
    assert _contains_in_flight(delay + 1, delay)
    assert _contains_in_flight(2 * delay + 5, delay)


@pytest.mark.parametrize("delay", [3, 10])
def test_window_not_longer_than_delay_misses_some(delay):
    assert not _contains_in_flight(delay, delay)
    assert not _contains_in_flight(max(1, delay // 2), delay)
