"""Figure rendering for training curves and dataset statistics.

Uses the non-interactive Agg backend so figures render to files in
headless environments.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .training import RunRecord


def save_training_curves(records: list[RunRecord], path: str | Path) -> Path:
    """Loss and dev accuracy against step, one line per seed."""
    if not records:
        raise ValueError("no run records to plot")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig, (ax_loss, ax_acc) = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
    for record in records:
        steps = [pt.step for pt in record.history]
        ax_loss.plot(steps, [pt.train_loss for pt in record.history],
                     marker="o", markersize=3, label=f"seed {record.seed}")
        ax_acc.plot(steps, [pt.dev_accuracy for pt in record.history],
                    marker="o", markersize=3, label=f"seed {record.seed}")
    ax_loss.set_ylabel("train loss")
    ax_acc.set_ylabel("dev accuracy")
    ax_acc.set_xlabel("step")
    ax_acc.set_ylim(0.0, 1.05)
    ax_acc.axhline(0.2, color="gray", linestyle=":", linewidth=1)
    ax_loss.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def save_split_stats(rows: dict[str, dict], path: str | Path) -> Path:
    """Bar panels for per-split counts and average lengths.

    ``rows`` maps split name to a SplitStats.as_row() dict.
    """
    if not rows:
        raise ValueError("no split statistics to plot")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    names = list(rows)
    fig, (ax_count, ax_len) = plt.subplots(1, 2, figsize=(9, 4))
    ax_count.bar(names, [rows[n]["count"] for n in names], color="#4878a8")
    ax_count.set_ylabel("instances")
    ax_count.set_title("split sizes")
    width = 0.4
    xs = range(len(names))
    ax_len.bar([x - width / 2 for x in xs],
               [rows[n]["avg_passage_len"] for n in names],
               width=width, label="passage", color="#4878a8")
    ax_len.bar([x + width / 2 for x in xs],
               [rows[n]["avg_question_len"] for n in names],
               width=width, label="question", color="#a85e48")
    ax_len.set_xticks(list(xs), names)
    ax_len.set_ylabel("mean tokens")
    ax_len.set_title("text lengths")
    ax_len.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
