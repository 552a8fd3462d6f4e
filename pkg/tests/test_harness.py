import numpy as np
import pytest
from scipy.signal import lfilter

from swimtrack.config import Config, ConfigError
from swimtrack.curriculum import in_outer_region
from swimtrack.harness import (
    LOG_COLUMNS,
    Trial,
    read_log,
    run_trial,
    summary_csv,
)

QUIET = {"target.speed_box": "0,0,0", "vision.center_sigma": 0.0, "vision.area_sigma": 0.0,
         "vision.confidence_sigma": 0.0, "vision.p_drop": 0.0}

SMALL_RL = {"dqn.hidden": "16,16", "dqn.erm_size": 1000, "dqn.batch_size": 16, "agent.history": 4,
            "dqn.optimizer": "adam", "dqn.eta": 1e-3}


def small_curriculum(seed=0, frames=1200):
    return Config().replace(**SMALL_RL, **{
        "trial.controller": "CURRICULUM", "trial.max_frames": frames, "trial.seed": seed,
        "curriculum.min_prefill": 200, "curriculum.decay_steps": 600,
    })


def test_short_benign_pid_trial():
    cfg = Config().replace(**QUIET, **{"trial.max_frames": 10})
    m = run_trial(cfg).metrics
    assert m.tracking_length == 10
    assert m.lost_events == 0 and not m.terminal


def test_invalid_history_rejected_before_stepping():
    cfg = Config()
    cfg.agent.history = 0
    with pytest.raises(ConfigError):
        Trial(cfg)


@pytest.mark.parametrize("controller", ["PID", "RL"])
def test_same_seed_same_summary_bytes(controller, tmp_path):
    cfg = Config().replace(**SMALL_RL, **{"trial.controller": controller, "trial.max_frames": 400,
                                          "trial.seed": 5, "trial.online_updates": True})
    a, b = run_trial(cfg, out_dir=tmp_path / "a"), run_trial(cfg, out_dir=tmp_path / "b")
    assert summary_csv([a]).encode() == summary_csv([b]).encode()
    tag = f"{controller.lower()}_seed5"
    assert (tmp_path / "a" / tag / "log.csv").read_bytes() == (tmp_path / "b" / tag / "log.csv").read_bytes()


def test_seed_isolation_under_reordering():
    cfgs = [Config().replace(**{"trial.max_frames": 300, "trial.seed": s}) for s in (1, 2, 3)]
    forward = [summary_csv([run_trial(c)]) for c in cfgs]
    backward = [summary_csv([run_trial(c)]) for c in reversed(cfgs)][::-1]
    assert forward == backward
    assert len(set(forward)) == 3


def test_expected_return_recomputed_from_log(tmp_path):
    cfg = Config().replace(**{"trial.max_frames": 1500, "trial.seed": 2})
    res = run_trial(cfg, out_dir=tmp_path, tag="t")
    rows = read_log(tmp_path / "t" / "log.csv")
    assert list(rows[0].keys()) == list(LOG_COLUMNS)
    x = np.array([float(r["x_c"]) for r in rows])
    y = np.array([float(r["y_c"]) for r in rows])
    mu, lam = cfg.agent.mu, cfg.agent.lam
    for values, scale, key in ((x, mu, "yaw"), (y, lam, "pitch")):
        r = scale / (np.abs(values) + scale)
        # discounted return G_t via a reversed IIR filter
        g = lfilter([1.0], [1.0, -0.99], r[::-1])[::-1]
        assert np.mean(g) == pytest.approx(getattr(res.metrics, f"expected_cumulative_reward_{key}"), abs=1e-9)
        assert np.mean(r) == pytest.approx(getattr(res.metrics, f"immediate_reward_avg_{key}"), abs=1e-12)
    logged = np.array([float(r["reward"]) for r in rows])
    np.testing.assert_allclose(logged, mu / (np.abs(x) + mu) + lam / (np.abs(y) + lam), atol=1e-12)


def test_log_never_exceeds_cap():
    for frames in (1, 7, 250):
        assert len(run_trial(Config().replace(**{"trial.max_frames": frames})).rows) <= frames


def test_terminal_loss_ends_trial():
    # target sprinting away faster than the robot can follow
    cfg = Config().replace(**{"target.speed_box": "3,0.05,0.05", "target.v_max": 3.0,
                              "curriculum.search_budget": 50, "trial.max_frames": 3000})
    cfg.target.t_min = cfg.target.t_max = 10_000
    res = run_trial(cfg)
    assert res.metrics.terminal
    assert res.metrics.tracking_length < 3000
    assert res.rows[-1]["controller"] == "SEARCH"


@pytest.fixture(scope="module")
def curriculum_run():
    return run_trial(small_curriculum())


def test_one_experience_per_env_step(curriculum_run):
    assert curriculum_run.replay.pushed == len(curriculum_run.rows)


def test_stage_sequence_in_log(curriculum_run):
    assert curriculum_run.stages == ["PID_EXPLORE", "SHARED_CONTROL", "RL_ONLY"]
    seq = [r["stage"] for r in curriculum_run.rows]
    order = {"PID_EXPLORE": 0, "SHARED_CONTROL": 1, "RL_ONLY": 2}
    assert all(order[a] <= order[b] for a, b in zip(seq, seq[1:]))


def test_shield_never_lets_rl_act_in_outer_band(curriculum_run):
    outer = 0
    for r in curriculum_run.curriculum_rows:
        if r["stage"] != "SHARED_CONTROL" or r["controller_in_charge"] == "SEARCH":
            continue
        if in_outer_region(r["x_c"], r["y_c"], r["outer_fraction"]):
            outer += 1
            assert r["controller_in_charge"] in ("PID", "PID_RANDOM")
        else:
            assert r["controller_in_charge"] == "RL"
            assert (r["yaw_idx"], r["pitch_idx"]) == (r["rl_yaw_idx"], r["rl_pitch_idx"])
    shielded = sum(r["controller_in_charge"] in ("PID", "PID_RANDOM") for r in curriculum_run.curriculum_rows
                   if r["stage"] == "SHARED_CONTROL")
    assert shielded == outer


def test_recorded_actions_valid(curriculum_run):
    for r in curriculum_run.curriculum_rows:
        assert 0 <= r["yaw_idx"] < 7 and 0 <= r["pitch_idx"] < 7


def test_curriculum_reproducible():
    a, b = run_trial(small_curriculum(frames=500)), run_trial(small_curriculum(frames=500))
    assert a.rows == b.rows
    assert a.net.theta.tobytes() == b.net.theta.tobytes()
