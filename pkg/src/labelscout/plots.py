"""Figure rendering for search trajectories and budget sweeps.

Every report path that writes CSV/JSON-lines can also render a matplotlib
figure next to it; rendering is file-only (Agg backend), there is no
interactive display.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .search import PHASE_EXPLOIT, PHASE_EXPLORE, PHASE_REFINE, PHASE_RERANK

PHASE_COLORS = {
    PHASE_EXPLORE: "tab:blue",
    PHASE_EXPLOIT: "tab:orange",
    PHASE_REFINE: "tab:green",
    PHASE_RERANK: "tab:red",
}


def plot_trajectory(events, out_path, title=None) -> None:
    """Two panels: raw score per step colored by phase, and the cumulative
    unique-call count."""
    fig, (ax_score, ax_calls) = plt.subplots(
        2, 1, figsize=(8, 6), sharex=True, height_ratios=[2, 1]
    )
    for phase, color in PHASE_COLORS.items():
        pts = [(e.step, e.raw_score) for e in events if e.phase == phase]
        if pts:
            xs, ys = zip(*pts)
            ax_score.scatter(xs, ys, s=12, color=color, label=phase, alpha=0.8)
    ax_score.set_ylabel("raw score")
    ax_score.legend(loc="lower right", fontsize=8)
    if title:
        ax_score.set_title(title)

    steps = [e.step for e in events]
    calls = [e.cumulative_calls for e in events]
    ax_calls.plot(steps, calls, color="black", lw=1)
    ax_calls.set_xlabel("step")
    ax_calls.set_ylabel("unique calls")
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)


def plot_sweep(summary, out_path, title=None) -> None:
    """Mean regret and top-1 hit rate as functions of the call budget."""
    budgets = [row["budget"] for row in summary]
    regrets = [row["mean_regret"] for row in summary]
    hits = [row["hit_rate"] for row in summary]

    fig, (ax_regret, ax_hit) = plt.subplots(1, 2, figsize=(9, 3.5))
    ax_regret.plot(budgets, regrets, "o-", color="tab:blue")
    ax_regret.set_xlabel("budget (unique calls)")
    ax_regret.set_ylabel("mean regret")
    ax_hit.plot(budgets, hits, "o-", color="tab:orange")
    ax_hit.set_xlabel("budget (unique calls)")
    ax_hit.set_ylabel("top-1 hit rate")
    ax_hit.set_ylim(-0.05, 1.05)
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
