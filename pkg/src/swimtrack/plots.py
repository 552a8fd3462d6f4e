"""Figures rendered from CSV outputs. Plotting only reads CSVs; it never
writes next to them except for the image files themselves."""
from __future__ import annotations

import csv
import logging
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from swimtrack.harness import read_log  # noqa: E402

log = logging.getLogger(__name__)


def plot_error_vs_time(log_csv: str | Path, out_png: str | Path, dt: float = 0.04) -> Path:
    rows = read_log(log_csv)
    t = np.arange(len(rows)) * dt
    x = np.array([float(r["x_c"]) for r in rows])
    y = np.array([float(r["y_c"]) for r in rows])
    fig, ax = plt.subplots(figsize=(8, 3.5))
    ax.plot(t, x, lw=0.7, label="x_c")
    ax.plot(t, y, lw=0.7, label="y_c")
    lost = np.array([int(r["lost_flag"]) for r in rows], dtype=bool)
    if lost.any():
        ax.fill_between(t, -1, 1, where=lost, color="0.85", step="mid", label="lost")
    ax.set_xlabel("time [s]")
    ax.set_ylabel("image error")
    ax.set_ylim(-1.05, 1.05)
    ax.legend(loc="upper right")
    fig.tight_layout()
    fig.savefig(out_png, dpi=120)
    plt.close(fig)
    return Path(out_png)


def plot_reward_vs_trial(curves_csv: str | Path, out_png: str | Path) -> Path:
    with open(curves_csv, newline="") as fh:
        rows = list(csv.DictReader(fh))
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.5), sharey=True)
    for ax, axis in zip(axes, ("yaw", "pitch")):
        for ctl in ("RL", "PID"):
            sel = [r for r in rows if r["axis"] == axis and r["controller"] == ctl]
            k = np.array([int(r["trial"]) for r in sel])
            m = np.array([float(r["mean_immediate_reward"]) for r in sel])
            s = np.array([float(r["std"]) for r in sel])
            ax.plot(k, m, marker="o", label=ctl)
            ax.fill_between(k, m - s, m + s, alpha=0.2)
        ax.set_title(axis)
        ax.set_xlabel("sequential trial")
    axes[0].set_ylabel("mean immediate reward")
    axes[0].legend()
    fig.tight_layout()
    fig.savefig(out_png, dpi=120)
    plt.close(fig)
    return Path(out_png)


def plot_trajectory(trajectory_csv: str | Path, out_png: str | Path) -> Path:
    """3D robot and target paths from a trial's trajectory.csv."""
    rows = read_log(trajectory_csv)
    positions = np.array([[float(r[f"robot_{a}"]) for a in "xyz"] for r in rows])
    target = np.array([[float(r[f"target_{a}"]) for a in "xyz"] for r in rows])
    fig = plt.figure(figsize=(6, 5))
    ax = fig.add_subplot(projection="3d")
    ax.plot(*positions.T, lw=1.0, label="robot")
    ax.plot(*target.T, lw=1.0, ls="--", label="target")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_zlabel("z [m]")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_png, dpi=120)
    plt.close(fig)
    return Path(out_png)


def emit_plots(in_dir: str | Path, out_dir: str | Path | None = None) -> list[Path]:
    """Render every recognised CSV under ``in_dir``. A failing figure is
    logged and skipped; the CSVs are opened read-only."""
    in_dir = Path(in_dir)
    out_dir = Path(out_dir) if out_dir is not None else in_dir / "plots"
    out_dir.mkdir(parents=True, exist_ok=True)
    made = []
    jobs = [(p, plot_error_vs_time, out_dir / f"{p.parent.name}_error.png") for p in sorted(in_dir.rglob("log.csv"))]
    jobs += [(p, plot_trajectory, out_dir / f"{p.parent.name}_trajectory.png")
             for p in sorted(in_dir.rglob("trajectory.csv"))]
    jobs += [(p, plot_reward_vs_trial, out_dir / f"{p.stem}_reward.png") for p in sorted(in_dir.glob("study2_*.csv"))]
    for src, fn, dst in jobs:
        try:
            made.append(fn(src, dst))
        except Exception as exc:  # a bad CSV must not stop the rest
            log.warning("could not plot %s: %s", src, exc)
            plt.close("all")
    return made
