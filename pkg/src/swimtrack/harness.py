"""Closed-loop trials: controller selection, logging and metrics.

The per-step log is the source of truth; every summary number in
:class:`TrialMetrics` is computed from the log rows by :func:`metrics_from_rows`.
"""
from __future__ import annotations

import csv
import io
import logging
from collections.abc import Callable
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from swimtrack.agent import (
    ActionGrid,
    AugmentedState,
    lost_view,
    make_features,
    reward_terms,
    reward_with_confidence,
    select_action,
)
from swimtrack.config import Config, ConfigError
from swimtrack.curriculum import (
    CurriculumSchedule,
    RecoveryState,
    Stage,
    shared_control_arbiter,
    spiral_search_step,
)
from swimtrack.dqn import DoubleDQN, QNetwork, ReplayMemory, load_checkpoint
from swimtrack.env import TrackingEnv, rng_streams
from swimtrack.pid import PidTrackingController, TrackingGains
from swimtrack.sim.dynamics import NEUTRAL_COMMAND, RateCommand

log = logging.getLogger(__name__)

LOG_COLUMNS = ("step", "stage", "controller", "x_c", "y_c", "area", "conf", "detected",
               "yaw_cmd", "pitch_cmd", "v_cmd", "reward", "lost_flag")
CURRICULUM_COLUMNS = ("step", "stage", "controller_in_charge", "outer_fraction", "x_c", "y_c",
                      "rl_yaw_idx", "rl_pitch_idx", "yaw_idx", "pitch_idx")
TRAJECTORY_COLUMNS = ("robot_x", "robot_y", "robot_z", "target_x", "target_y", "target_z")
SUMMARY_COLUMNS = ("seed", "scenario", "controller", "history", "delay_steps", "beta",
                   "tracking_length", "expected_cumulative_reward_yaw", "expected_cumulative_reward_pitch",
                   "immediate_reward_avg_yaw", "immediate_reward_avg_pitch", "mean_x_c", "mean_abs_y_c",
                   "var_y_c", "miss_rate", "lost_events", "terminal")


@dataclass
class TrialMetrics:
    tracking_length: int
    expected_cumulative_reward_yaw: float
    expected_cumulative_reward_pitch: float
    immediate_reward_avg_yaw: float
    immediate_reward_avg_pitch: float
    mean_x_c: float
    mean_abs_y_c: float
    var_y_c: float
    miss_rate: float
    lost_events: int
    terminal: bool


def discounted_returns(r: np.ndarray, gamma: float) -> np.ndarray:
    out = np.empty_like(r, dtype=np.float64)
    acc = 0.0
    for i in range(len(r) - 1, -1, -1):
        acc = r[i] + gamma * acc
        out[i] = acc
    return out


def metrics_from_rows(rows: list[dict], mu: float, lam: float, gamma: float,
                      terminal: bool, skip: int = 0) -> TrialMetrics:
    """Summary statistics recomputed from log rows alone.

    Expected cumulative reward is the trial average of the discounted
    return from each step. ``skip`` drops the first rows from the
    position/miss statistics (steady-state view) but not from the rest.
    """
    n = len(rows)
    if n == 0:
        raise ValueError("empty log")
    x = np.array([float(r["x_c"]) for r in rows])
    y = np.array([float(r["y_c"]) for r in rows])
    lost = np.array([int(r["lost_flag"]) for r in rows], dtype=bool)
    detected = np.array([int(r["detected"]) for r in rows], dtype=bool)
    ry = np.array([reward_terms(a, 0.0, mu, lam)[0] for a in x])
    rp = np.array([reward_terms(0.0, b, mu, lam)[1] for b in y])
    live = ~lost
    live[:skip] = False
    steady = slice(skip, None)
    lost_events = int(np.sum(lost[1:] & ~lost[:-1]) + lost[0])
    return TrialMetrics(
        tracking_length=n,
        expected_cumulative_reward_yaw=float(np.mean(discounted_returns(ry, gamma))),
        expected_cumulative_reward_pitch=float(np.mean(discounted_returns(rp, gamma))),
        immediate_reward_avg_yaw=float(np.mean(ry)),
        immediate_reward_avg_pitch=float(np.mean(rp)),
        mean_x_c=float(np.mean(x[live])) if live.any() else 0.0,
        mean_abs_y_c=float(np.mean(np.abs(y[live]))) if live.any() else 0.0,
        var_y_c=float(np.var(y[live])) if live.any() else 0.0,
        miss_rate=float(np.mean(~detected[steady])) if n > skip else 0.0,
        lost_events=lost_events,
        terminal=bool(terminal),
    )


@dataclass
class TrialResult:
    config: Config
    metrics: TrialMetrics
    rows: list[dict]
    curriculum_rows: list[dict] = field(default_factory=list)
    net: QNetwork | None = None
    replay: ReplayMemory | None = None
    stages: list[str] = field(default_factory=list)
    trajectory: np.ndarray | None = None  # (N, 6): robot xyz, target xyz

    def summary_row(self) -> dict:
        cfg = self.config
        row = {
            "seed": cfg.trial.seed,
            "scenario": cfg.trial.scenario,
            "controller": cfg.trial.controller,
            "history": cfg.agent.history,
            "delay_steps": cfg.sim.delay_steps,
            "beta": cfg.agent.beta,
        }
        row.update(asdict(self.metrics))
        return row


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return repr(v)
    return str(v)


def rows_to_csv(rows: list[dict], columns) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in columns])
    return buf.getvalue()


def read_log(path: str | Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def summary_csv(results: list[TrialResult]) -> str:
    return rows_to_csv([r.summary_row() for r in results], SUMMARY_COLUMNS)


def write_trial(result: TrialResult, out_dir: str | Path, tag: str) -> Path:
    """One directory per trial; nothing is shared between trials."""
    out = Path(out_dir) / tag
    out.mkdir(parents=True, exist_ok=True)
    (out / "log.csv").write_text(rows_to_csv(result.rows, LOG_COLUMNS))
    (out / "summary.csv").write_text(summary_csv([result]))
    if result.curriculum_rows:
        (out / "curriculum.csv").write_text(rows_to_csv(result.curriculum_rows, CURRICULUM_COLUMNS))
    if result.trajectory is not None and len(result.trajectory):
        rows = [dict(zip(TRAJECTORY_COLUMNS, map(float, p))) for p in result.trajectory]
        (out / "trajectory.csv").write_text(rows_to_csv(rows, TRAJECTORY_COLUMNS))
    return out


def _build_net(cfg: Config, net: QNetwork | None) -> QNetwork:
    n_in = 6 * cfg.agent.history
    if net is None and cfg.trial.checkpoint:
        net, history = load_checkpoint(cfg.trial.checkpoint)
        if history != cfg.agent.history:
            raise ConfigError(f"checkpoint history {history} != agent.history {cfg.agent.history}")
    if net is None:
        net = QNetwork(n_in, cfg.dqn.hidden, cfg.agent.yaw_levels, cfg.agent.pitch_levels, seed=cfg.dqn.init_seed)
    if net.n_in != n_in or net.n_yaw != cfg.agent.yaw_levels or net.n_pitch != cfg.agent.pitch_levels:
        raise ConfigError("network shape does not match agent config")
    return net


def _view(track, last_xy: tuple[float, float]) -> tuple[float, float, float, float]:
    """Image position, area and confidence the controller sees this frame."""
    if track is None:
        x, y = lost_view(*last_xy)
        return x, y, 0.0, 0.0
    return (min(1.0, max(-1.0, float(track.x[0]))), min(1.0, max(-1.0, float(track.x[1]))),
            max(0.0, float(track.x[2])), min(1.0, max(0.0, float(track.x[4]))))


class Trial:
    """One closed-loop run: sim -> vision -> tracker -> controller -> delay -> sim.

    Controllers: ``PID`` (baseline), ``RL`` (greedy network, optional online
    updates) and ``CURRICULUM`` (the staged training procedure; the
    environment is reset after a terminal loss instead of ending the run).
    """

    def __init__(self, cfg: Config, net: QNetwork | None = None, replay: ReplayMemory | None = None,
                 progress: Callable[[int, "Trial"], None] | None = None, progress_every: int = 10_000):
        cfg.validate()
        if cfg.agent.history <= 0:
            raise ConfigError("agent.history must be positive")
        self.cfg = cfg
        self.rngs = rng_streams(cfg.trial.seed)
        self.env = TrackingEnv(cfg, self.rngs)
        self.grid = ActionGrid.from_config(cfg.agent)
        self.pid = PidTrackingController(TrackingGains.from_config(cfg.pid), cfg.sim.dt)
        self.controller = cfg.trial.controller
        self.learner = None
        self.replay = None
        if self.controller in ("RL", "CURRICULUM"):
            d = cfg.dqn
            self.learner = DoubleDQN(_build_net(cfg, net), d.gamma, d.tau, d.eta, d.optimizer, d.reward_scale)
            self.replay = replay if replay is not None else ReplayMemory(d.erm_size, 6 * cfg.agent.history)
        self.schedule = CurriculumSchedule(cfg.curriculum) if self.controller == "CURRICULUM" else None
        self.losses: list[float] = []
        self.progress, self.progress_every = progress, progress_every

    def _updates_enabled(self, stage: Stage | None) -> bool:
        if self.learner is None:
            return False
        if self.controller == "CURRICULUM":
            return stage is not Stage.PID_EXPLORE
        return self.cfg.trial.online_updates

    def run(self) -> TrialResult:
        cfg = self.cfg
        env, grid, pid = self.env, self.grid, self.pid
        a_cfg, c_cfg = cfg.agent, cfg.curriculum
        rngs = self.rngs
        rows: list[dict] = []
        cur_rows: list[dict] = []
        stages: list[str] = []
        path: list[np.ndarray] = []

        window = AugmentedState(a_cfg.history)
        last_cmd = NEUTRAL_COMMAND
        last_xy = (0.0, 0.0)
        rec: RecoveryState | None = None
        pending = None
        setpoint, setpoint_left = (0.0, 0.0), 0
        terminal = False
        rl_eps = a_cfg.epsilon if (self.controller == "CURRICULUM" or cfg.trial.online_updates) \
            else cfg.trial.eval_epsilon
        step = 0

        while step < cfg.trial.max_frames:
            track = env.track
            lost = track is None
            x, y, area, conf = _view(track, last_xy)
            if not lost:
                last_xy = (x, y)
            r = reward_with_confidence(x, y, conf, a_cfg.mu, a_cfg.lam, a_cfg.beta)
            window.push(make_features(track, last_cmd, a_cfg, lost_xy=(x, y)))
            s = window.vector()

            stage = None
            if self.schedule is not None:
                stage_info = self.schedule.advance(step, len(self.replay))
                stage = stage_info.stage
                if not stages or stages[-1] != stage.value:
                    stages.append(stage.value)

            search_over = lost and rec is not None and rec.steps >= c_cfg.search_budget
            if pending is not None and self.learner is not None:
                self.replay.push(pending[0], pending[1], pending[2], r, s, search_over)
                if self._updates_enabled(stage) and len(self.replay) >= cfg.dqn.batch_size:
                    batch = self.replay.sample(cfg.dqn.batch_size, rngs["replay"])
                    self.losses.append(self.learner.train_step(batch))
            pending = None

            if search_over:
                terminal = True
                if self.controller != "CURRICULUM":
                    break
                log.debug("terminal loss at step %d; resetting", step)
                env.reset()
                pid.reset()
                window = AugmentedState(a_cfg.history)
                last_cmd, last_xy, rec = NEUTRAL_COMMAND, (0.0, 0.0), None
                continue

            rl_idx = (-1, -1)
            if lost:
                if rec is None:
                    rec = RecoveryState.start(last_xy, cfg.vision, c_cfg)
                cmd, rec = spiral_search_step(rec, c_cfg, cfg.sim.dt, a_cfg.max_rate)
                yi, pi = grid.quantize(cmd.yaw_rate, cmd.pitch_rate)
                who = "SEARCH"
            else:
                if rec is not None:
                    rec = None
                    pid.reset()
                if self.controller == "PID":
                    cmd = pid.command(track)
                    yi, pi = grid.quantize(cmd.yaw_rate, cmd.pitch_rate)
                    who = "PID"
                elif self.controller == "RL" or stage is Stage.RL_ONLY:
                    v = pid.forward_only(track)
                    yi, pi, cmd = select_action(self.learner.current, s, rl_eps, grid, rngs["policy"], v)
                    who = "RL"
                elif stage is Stage.PID_EXPLORE:
                    if setpoint_left <= 0:
                        box = c_cfg.setpoint_box
                        setpoint = tuple(float(v) for v in rngs["setpoint"].uniform(-box, box, 2))
                        setpoint_left = int(rngs["setpoint"].integers(c_cfg.setpoint_min, c_cfg.setpoint_max + 1))
                    setpoint_left -= 1
                    raw = pid.command(track, setpoint)
                    yi, pi = grid.quantize(raw.yaw_rate, raw.pitch_rate)
                    cmd = RateCommand(raw.forward_speed, *grid.rates(yi, pi))
                    who = "PID"
                else:
                    raw = pid.command(track)
                    rl_y, rl_p, _ = select_action(self.learner.current, s, rl_eps, grid, rngs["policy"])
                    rl_idx = (rl_y, rl_p)
                    yi, pi, who = shared_control_arbiter(track, stage_info, rl_idx,
                                                         grid.quantize(raw.yaw_rate, raw.pitch_rate),
                                                         grid, rngs["policy"])
                    cmd = RateCommand(raw.forward_speed, *grid.rates(yi, pi))

            stage_name = stage.value if stage is not None else self.controller
            rows.append({
                "step": step, "stage": stage_name, "controller": who, "x_c": x, "y_c": y,
                "area": area, "conf": conf, "detected": int(env.obs.detected),
                "yaw_cmd": cmd.yaw_rate, "pitch_cmd": cmd.pitch_rate, "v_cmd": cmd.forward_speed,
                "reward": r, "lost_flag": int(lost),
            })
            if self.schedule is not None:
                cur_rows.append({
                    "step": step, "stage": stage_name, "controller_in_charge": who,
                    "outer_fraction": stage_info.outer_region_fraction, "x_c": x, "y_c": y,
                    "rl_yaw_idx": rl_idx[0], "rl_pitch_idx": rl_idx[1], "yaw_idx": yi, "pitch_idx": pi,
                })

            path.append(np.concatenate([env.robot.position, env.target.position]))
            env.step(cmd)
            last_cmd = cmd
            pending = (s, yi, pi)
            step += 1
            if self.progress is not None and step % self.progress_every == 0:
                self.progress(step, self)

        if pending is not None and self.learner is not None:
            # close the last transition so every env step yields one experience
            x, y, _, conf = _view(env.track, last_xy)
            window.push(make_features(env.track, last_cmd, a_cfg, lost_xy=(x, y)))
            r = reward_with_confidence(x, y, conf, a_cfg.mu, a_cfg.lam, a_cfg.beta)
            self.replay.push(pending[0], pending[1], pending[2], r, window.vector(), False)

        metrics = metrics_from_rows(rows, a_cfg.mu, a_cfg.lam, cfg.trial.metric_gamma,
                                    terminal and self.controller != "CURRICULUM", cfg.trial.steady_skip)
        return TrialResult(cfg, metrics, rows, cur_rows,
                           self.learner.current if self.learner else None, self.replay, stages,
                           np.array(path).reshape(-1, 6))


def run_trial(cfg: Config, net: QNetwork | None = None, out_dir: str | Path | None = None,
              tag: str | None = None, replay: ReplayMemory | None = None) -> TrialResult:
    result = Trial(cfg, net, replay).run()
    if out_dir is not None:
        write_trial(result, out_dir, tag or f"{cfg.trial.controller.lower()}_seed{cfg.trial.seed}")
    return result


def stage1_collect(cfg: Config, replay: ReplayMemory, n_steps: int, seed: int | None = None) -> ReplayMemory:
    """Fill ``replay`` with ``n_steps`` PID-driven experiences toward random
    image-plane setpoints (the first curriculum stage on its own)."""
    if n_steps <= 0:
        return replay
    run = cfg.replace(**{"trial.controller": "CURRICULUM", "trial.max_frames": n_steps,
                         "curriculum.min_prefill": replay.capacity + n_steps + 1})
    if seed is not None:
        run.trial.seed = seed
    Trial(run, replay=replay).run()
    return replay
