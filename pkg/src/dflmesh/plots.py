"""Figure rendering for the report paths (always written next to the CSVs)."""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

__all__ = ["metrics_figure", "comparison_figure", "failure_figure"]


def _loss_axis(ax, rounds, values, label):
    finite = [v for v in values if not math.isnan(v)]
    ax.plot(rounds, values, lw=1.5)
    ax.set_xlabel("round")
    ax.set_ylabel(label)
    if finite and min(finite) > 0:
        ax.set_yscale("log")
    ax.grid(alpha=0.3)


def metrics_figure(metrics, path, title: str = "") -> None:
    """2x2 panel: train loss, test metric, consensus distance, comm cost."""
    rounds = [m.round for m in metrics]
    fig, axes = plt.subplots(2, 2, figsize=(9, 6.5))
    _loss_axis(axes[0, 0], rounds, [m.train_loss for m in metrics], "train loss")
    has_acc = any(not math.isnan(m.test_acc) for m in metrics)
    if has_acc:
        axes[0, 1].plot(rounds, [m.test_acc for m in metrics], lw=1.5, color="tab:green")
        axes[0, 1].set_ylabel("test accuracy")
        axes[0, 1].set_xlabel("round")
        axes[0, 1].grid(alpha=0.3)
    else:
        _loss_axis(axes[0, 1], rounds, [m.test_loss for m in metrics], "test loss")
    _loss_axis(axes[1, 0], rounds, [m.consensus_dist for m in metrics], "consensus distance")
    axes[1, 1].plot(rounds, [m.cum_comm_cost for m in metrics], lw=1.5, color="tab:red")
    axes[1, 1].set_ylabel("cumulative comm cost")
    axes[1, 1].set_xlabel("round")
    axes[1, 1].grid(alpha=0.3)
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def comparison_figure(curves: dict, path, metric: str = "train_loss", ylabel: str = "train loss") -> None:
    """Overlay one metric across topologies; ``curves`` maps label -> metrics list."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for label, metrics in curves.items():
        ax.plot(
            [m.round for m in metrics],
            [getattr(m, metric) for m in metrics],
            lw=1.5,
            label=label,
        )
    ax.set_xlabel("round")
    ax.set_ylabel(ylabel)
    if metric.endswith("loss"):
        vals = [
            getattr(m, metric)
            for ms in curves.values()
            for m in ms
            if not math.isnan(getattr(m, metric))
        ]
        if vals and min(vals) > 0:
            ax.set_yscale("log")
    ax.grid(alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def failure_figure(rows: list[dict], path) -> None:
    """Final accuracy/loss against failure fraction."""
    fig, ax = plt.subplots(figsize=(6.5, 4.2))
    fractions = [r["fraction"] for r in rows]
    if any(not math.isnan(r.get("final_acc", float("nan"))) for r in rows):
        ax.plot(fractions, [r["final_acc"] for r in rows], "o-", lw=1.5)
        ax.set_ylabel("final test accuracy")
    else:
        ax.plot(fractions, [r["final_train_loss"] for r in rows], "o-", lw=1.5)
        ax.set_ylabel("final train loss")
    ax.set_xlabel("failure fraction")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
