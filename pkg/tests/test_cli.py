import csv

import pytest

from swimtrack.cli import main
from swimtrack.dqn import load_checkpoint

FAST = ["--set", "dqn.hidden=16,16", "--set", "dqn.erm_size=500", "--set", "dqn.batch_size=16",
        "--set", "agent.history=4", "--set", "curriculum.min_prefill=100", "--set", "curriculum.decay_steps=100"]


def test_run_single_trials(tmp_path, capsys):
    assert main(["run", "--out", str(tmp_path), "--seeds", "2", "--set", "trial.max_frames=50"]) == 0
    rows = list(csv.DictReader(open(tmp_path / "summary.csv")))
    assert [r["seed"] for r in rows] == ["0", "1"]
    assert (tmp_path / "pid_seed1" / "log.csv").exists()


def test_config_file_and_bad_key(tmp_path, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("trial.max_frames=20\nsim.delay_steps=2\n")
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    cfg.write_text("sim.no_such_key=1\n")
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2


def test_replay_matches_summary(tmp_path, capsys):
    main(["run", "--out", str(tmp_path), "--set", "trial.max_frames=120"])
    summary = next(csv.DictReader(open(tmp_path / "summary.csv")))
    capsys.readouterr()
    assert main(["replay", "--log", str(tmp_path / "pid_seed0" / "log.csv")]) == 0
    out = dict(line.split("=", 1) for line in capsys.readouterr().out.split())
    assert float(out["expected_cumulative_reward_yaw"]) == pytest.approx(
        float(summary["expected_cumulative_reward_yaw"]), abs=1e-9)


def test_train_stages_and_checkpoint(tmp_path, capsys):
    s1 = tmp_path / "s1"
    assert main(["train", "--stage", "1", "--steps", "150", "--out", str(s1)] + FAST) == 0
    assert main(["train", "--stage", "auto", "--steps", "300", "--replay", str(s1 / "replay.npz"),
                 "--out", str(tmp_path / "auto")] + FAST) == 0
    net, history = load_checkpoint(tmp_path / "auto" / "agent.bin")
    assert history == 4 and net.n_in == 24
    assert main(["train", "--stage", "3", "--steps", "50", "--checkpoint", str(tmp_path / "auto" / "agent.bin"),
                 "--out", str(tmp_path / "rl")] + FAST) == 0
    assert "RL_ONLY" in capsys.readouterr().out


def test_tune_pid_writes_candidates(tmp_path, capsys):
    assert main(["tune-pid", "--out", str(tmp_path), "--frames", "30"]) == 0
    rows = list(csv.DictReader(open(tmp_path / "pid_candidates.csv")))
    assert len(rows) == 45
    assert (tmp_path / "tuned_pid.cfg").read_text().startswith("pid.yaw_kp=")


def test_plot_from_outputs(tmp_path, capsys):
    main(["run", "--out", str(tmp_path), "--set", "trial.max_frames=40"])
    (tmp_path / "broken").mkdir()
    (tmp_path / "broken" / "log.csv").write_text("not,a,log\n1,2\n")
    before = (tmp_path / "pid_seed0" / "log.csv").read_bytes()
    assert main(["plot", "--in", str(tmp_path)]) == 0
    pngs = sorted(p.name for p in (tmp_path / "plots").glob("*.png"))
    assert "pid_seed0_error.png" in pngs and "pid_seed0_trajectory.png" in pngs
    assert (tmp_path / "pid_seed0" / "log.csv").read_bytes() == before
