"""Render figures from the CSV reports written by hab-station.

Each plot is produced only when its input file exists in the run directory:
learning_curve.csv, scores.csv, heatmap.csv, model_diff_levels.csv and
trajectories/*.csv (or top_trajectories/*.csv).
"""
import argparse
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402


def plot_learning_curve(curve: pd.DataFrame, out: Path):
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(14, 5))
    ax1.plot(curve["step"], curve["mean_reward"], label="mean reward")
    ax1.plot(curve["step"], curve["best_mean_reward"], linestyle="--", label="best")
    ax1.set_xlabel("step")
    ax1.set_ylabel("evaluation reward")
    ax1.legend()
    for column in ("twr25", "twr50", "twr75"):
        ax2.plot(curve["step"], curve[column], label=column.upper())
    ax2.set_xlabel("step")
    ax2.set_ylabel("time within radius")
    ax2.set_ylim(0, 1)
    ax2.legend()
    plt.tight_layout()
    fig.savefig(out, dpi=120)
    plt.close(fig)


def plot_score_histogram(scores: pd.DataFrame, out: Path):
    fig, ax = plt.subplots(figsize=(8, 5))
    bins = np.linspace(0, 1, 11)
    ax.hist(scores["fs"], bins=bins, alpha=0.6, label="grid")
    if "fs_paired" in scores:
        ax.hist(scores["fs_paired"], bins=bins, alpha=0.6, label="paired grid")
    ax.set_xlabel("forecast score")
    ax.set_ylabel("samples")
    ax.legend()
    plt.tight_layout()
    fig.savefig(out, dpi=120)
    plt.close(fig)


def plot_heatmap(heatmap: pd.DataFrame, out: Path):
    fig, ax = plt.subplots(figsize=(9, 7))
    values = heatmap.to_numpy(dtype=float)
    image = ax.imshow(np.ma.masked_invalid(values), cmap="viridis", aspect="auto")
    ax.set_xticks(range(len(heatmap.columns)))
    ax.set_xticklabels(heatmap.columns, rotation=45, ha="right")
    ax.set_yticks(range(len(heatmap.index)))
    ax.set_yticklabels(heatmap.index)
    ax.set_xlabel("forecast score")
    ax.set_ylabel("TWR50")
    fig.colorbar(image, ax=ax, label="episodes")
    plt.tight_layout()
    fig.savefig(out, dpi=120)
    plt.close(fig)


def plot_model_diff(levels: pd.DataFrame, out: Path):
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(14, 5))
    for month, group in levels.groupby("month", sort=False):
        ax1.errorbar(group["level"], group["angle_mean"], yerr=group["angle_std"], capsize=3, label=month)
        ax2.errorbar(group["level"], group["magnitude_mean"], yerr=group["magnitude_std"], capsize=3, label=month)
    ax1.set_ylabel("angular difference (deg)")
    ax2.set_ylabel("speed difference (m/s)")
    for ax in (ax1, ax2):
        ax.set_xlabel("level")
        ax.legend()
    plt.tight_layout()
    fig.savefig(out, dpi=120)
    plt.close(fig)


def plot_trajectories(paths, out: Path, limit: int = 12):
    fig, ax = plt.subplots(figsize=(8, 8))
    for path in sorted(paths)[:limit]:
        track = pd.read_csv(path)
        ax.plot(track["lon"], track["lat"], linewidth=1, label=path.stem)
        ax.plot(track["lon"].iloc[0], track["lat"].iloc[0], "k.", markersize=4)
    ax.set_xlabel("longitude")
    ax.set_ylabel("latitude")
    ax.legend(fontsize="small")
    plt.tight_layout()
    fig.savefig(out, dpi=120)
    plt.close(fig)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("run_dir", help="directory holding hab-station outputs")
    parser.add_argument("--out", help="figure directory (default <run_dir>/figures)")
    args = parser.parse_args()

    run_dir = Path(args.run_dir)
    out_dir = Path(args.out) if args.out else run_dir / "figures"
    out_dir.mkdir(parents=True, exist_ok=True)

    written = []
    if (run_dir / "learning_curve.csv").exists():
        plot_learning_curve(pd.read_csv(run_dir / "learning_curve.csv"), out_dir / "learning_curve.png")
        written.append("learning_curve.png")
    if (run_dir / "scores.csv").exists():
        plot_score_histogram(pd.read_csv(run_dir / "scores.csv"), out_dir / "score_histogram.png")
        written.append("score_histogram.png")
    if (run_dir / "heatmap.csv").exists():
        plot_heatmap(pd.read_csv(run_dir / "heatmap.csv", index_col=0), out_dir / "heatmap.png")
        written.append("heatmap.png")
    if (run_dir / "model_diff_levels.csv").exists():
        plot_model_diff(pd.read_csv(run_dir / "model_diff_levels.csv"), out_dir / "model_diff.png")
        written.append("model_diff.png")
    for folder in ("top_trajectories", "trajectories"):
        tracks = list((run_dir / folder).glob("*.csv"))
        if tracks:
            plot_trajectories(tracks, out_dir / f"{folder}.png")
            written.append(f"{folder}.png")

    for name in written:
        print(out_dir / name)
    if not written:
        print(f"no report files found in {run_dir}")


if __name__ == "__main__":
    main()
