"""Command line entry point: ``swimtrack <command> ...``."""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from swimtrack.config import Config, ConfigError, dump_config, load_config
from swimtrack.dqn import ReplayMemory, load_checkpoint, save_checkpoint
from swimtrack.harness import metrics_from_rows, read_log, run_trial, summary_csv

log = logging.getLogger("swimtrack")


def _config(args) -> Config:
    cfg = load_config(args.config) if getattr(args, "config", None) else Config()
    for kv in getattr(args, "set", None) or []:
        if "=" not in kv:
            raise ConfigError(f"--set expects key=value, got {kv!r}")
        key, value = kv.split("=", 1)
        cfg = cfg.replace(**{key.strip(): value.strip()})
    return cfg.validate()


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config key")


def cmd_run(args) -> int:
    from swimtrack import studies

    cfg = _config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    seeds = list(range(args.seeds))
    if args.study is None:
        results = []
        for s in seeds:
            cfg.trial.seed = s
            results.append(run_trial(cfg.replace(), out_dir=out))
        (out / "summary.csv").write_text(summary_csv(results))
        print(summary_csv(results), end="")
        return 0

    base = studies.study_base(args.profile, not args.nominal_target, cfg)
    if args.tune_pid:
        base = base.replace(**studies.tune_pid(base))
    if args.study == 1:
        res = studies.run_study1(base, seeds, args.histories, args.train_steps, args.eval_frames, out,
                                 args.workers)
        print(res.table_csv(), end="")
    elif args.study == 2:
        if args.checkpoint:
            net, history = load_checkpoint(args.checkpoint)
            base = base.replace(**{"agent.history": history})
        else:
            log.info("no checkpoint given; pretraining one agent for %d steps", args.train_steps)
            net = studies.train_agent(base, 0, args.train_steps).net
            save_checkpoint(out / "pretrained.bin", net, base.agent.history)
        for scenario in args.scenario:
            res = studies.run_study2(base, scenario, seeds, net, args.trials, args.trial_frames, out, args.workers)
            print(res.curves_csv(), end="")
    else:
        res = studies.run_study3(base, seeds, args.beta, args.left_bias, args.train_steps, args.eval_frames,
                                 out_dir=out, workers=args.workers)
        print(res.report_csv(), end="")
    (out / "config.cfg").write_text(dump_config(base))
    return 0


def cmd_tune_pid(args) -> int:
    from swimtrack import studies

    cfg = _config(args)
    record: list = []
    best = studies.tune_pid(cfg, args.frames, args.seed, record=record)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "pid_candidates.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["kp", "ki", "kd", "score"])
        for (kp, ki, kd), score in record:
            w.writerow([kp, ki, kd, repr(score)])
    (out / "tuned_pid.cfg").write_text("".join(f"{k}={v!r}\n" for k, v in best.items()))
    print(" ".join(f"{k}={v}" for k, v in best.items()))
    return 0


def cmd_train(args) -> int:
    from swimtrack.harness import stage1_collect

    cfg = _config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg = cfg.replace(**{"trial.controller": "CURRICULUM", "trial.max_frames": args.steps})
    replay = ReplayMemory.load(args.replay, cfg.dqn.erm_size) if args.replay else None
    if args.stage == "1":
        replay = replay or ReplayMemory(cfg.dqn.erm_size, 6 * cfg.agent.history)
        stage1_collect(cfg, replay, args.steps)
        replay.save(out / "replay.npz")
        print(f"collected {args.steps} experiences -> {out / 'replay.npz'}")
        return 0
    if args.stage == "2":
        cfg.curriculum.min_prefill = 0
    elif args.stage == "3":
        cfg.curriculum.min_prefill = 0
        cfg.curriculum.decay_steps = 0
    net = None
    if args.checkpoint:
        net, history = load_checkpoint(args.checkpoint)
        cfg.agent.history = history
    res = run_trial(cfg, net=net, out_dir=out, tag="train", replay=replay)
    save_checkpoint(out / "agent.bin", res.net, cfg.agent.history)
    res.replay.save(out / "replay.npz")
    print(f"stages {' -> '.join(res.stages)}; checkpoint {out / 'agent.bin'}")
    return 0


def cmd_replay(args) -> int:
    cfg = _config(args)
    rows = read_log(args.log)
    terminal = bool(rows) and rows[-1]["controller"] == "SEARCH" and len(rows) < cfg.trial.max_frames
    m = metrics_from_rows(rows, cfg.agent.mu, cfg.agent.lam, cfg.trial.metric_gamma, terminal, args.skip)
    for k, v in vars(m).items():
        print(f"{k}={v}")
    return 0


def cmd_plot(args) -> int:
    from swimtrack.plots import emit_plots

    made = emit_plots(args.inp, args.out)
    for p in made:
        print(p)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="swimtrack", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="single trials, or one of the three studies")
    _common(p)
    p.add_argument("--study", type=int, choices=(1, 2, 3))
    p.add_argument("--seeds", type=int, default=1, help="number of seeds, 0..N-1")
    p.add_argument("--out", required=True)
    p.add_argument("--profile", choices=("desk", "table"), default="desk")
    p.add_argument("--nominal-target", action="store_true", help="skip the evasive study target")
    p.add_argument("--tune-pid", action="store_true", help="tune the PID baseline before the study")
    p.add_argument("--histories", type=int, nargs="+", default=[5, 10, 20, 30])
    p.add_argument("--train-steps", type=int, default=100_000)
    p.add_argument("--eval-frames", type=int, default=45_000)
    p.add_argument("--scenario", nargs="+", default=["high_damping_negative_buoyancy", "right_rear_leg_fault"])
    p.add_argument("--checkpoint", help="pretrained agent for study 2")
    p.add_argument("--trials", type=int, default=8, help="sequential trials per seed (study 2)")
    p.add_argument("--trial-frames", type=int, default=2500)
    p.add_argument("--beta", type=float, default=0.5)
    p.add_argument("--left-bias", type=float, default=0.6)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("tune-pid", help="grid search over PID gains")
    _common(p)
    p.add_argument("--out", required=True)
    p.add_argument("--frames", type=int, default=4000)
    p.add_argument("--seed", type=int, default=12345)
    p.set_defaults(func=cmd_tune_pid)

    p = sub.add_parser("train", help="run the training curriculum")
    _common(p)
    p.add_argument("--stage", choices=("auto", "1", "2", "3"), default="auto")
    p.add_argument("--steps", type=int, default=100_000)
    p.add_argument("--checkpoint", help="start from this network")
    p.add_argument("--replay", help="start from this replay file")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("replay", help="recompute summary metrics from a per-step log")
    _common(p)
    p.add_argument("--log", required=True)
    p.add_argument("--skip", type=int, default=0)
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("plot", help="render figures from CSV outputs")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_plot)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
