"""Figure rendering for experiment results (budget curves, summary bars)."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def budget_curve_figure(records, out_path) -> Path:
    """Mean test MAE vs labeled-set size, one line per strategy."""
    strategies = sorted({r.strategy for r in records})
    fig, ax = plt.subplots(figsize=(6, 4))
    for strat in strategies:
        rows = [r for r in records if r.strategy == strat]
        sizes = sorted({r.labeled_size for r in rows})
        means, stds = [], []
        for s in sizes:
            maes = [r.mae for r in rows if r.labeled_size == s]
            means.append(np.mean(maes))
            stds.append(np.std(maes))
        ax.errorbar(sizes, means, yerr=stds, marker="o", capsize=3,
                    label=strat)
    ax.set_xlabel("labeled scenes")
    ax.set_ylabel("test MAE")
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    out_path = Path(out_path)
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path


def summary_bars_figure(tables, out_path) -> Path:
    """Final MAE mean with std whiskers, one bar per strategy."""
    names = [t.strategy for t in tables]
    means = [t.mae_mean for t in tables]
    stds = [t.mae_std for t in tables]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(range(len(names)), means, yerr=stds, capsize=4, color="#4878a8")
    ax.set_xticks(range(len(names)))
    ax.set_xticklabels(names, rotation=20, ha="right")
    ax.set_ylabel("final test MAE (mean over trials)")
    ax.grid(True, axis="y", alpha=0.3)
    fig.tight_layout()
    out_path = Path(out_path)
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path


def render_report(records, tables, out_dir) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    return [budget_curve_figure(records, out_dir / "budget_curve.png"),
            summary_bars_figure(tables, out_dir / "summary_mae.png")]
