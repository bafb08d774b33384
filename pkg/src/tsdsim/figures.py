"""Figure rendering for reports: simulated statistics next to oracle values."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402


def probability_figure(report, path):
    """Grouped bar chart of estimated probabilities against the oracle."""
    labels = [row["label"] for row in report.rows]
    est = np.array([row["probability"] for row in report.rows])
    se = np.array([row["std_error"] for row in report.rows])
    oracle = np.array([row["oracle"] for row in report.rows])
    x = np.arange(len(labels))
    fig, ax = plt.subplots(figsize=(1.2 * len(labels) + 3, 4))
    ax.bar(x - 0.2, est, width=0.4, yerr=3 * se, capsize=3,
           label="simulated", color="tab:blue")
    ax.bar(x + 0.2, oracle, width=0.4, label="oracle", color="tab:orange")
    ax.set_xticks(x)
    ax.set_xticklabels(labels, rotation=30, ha="right")
    ax.set_ylabel("probability")
    ax.set_title(report.kind)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def correlation_figure(report, path):
    """Bar chart of the four setting correlations against the oracle."""
    labels = [row["label"] for row in report.correlations]
    est = np.array([row["estimate"] for row in report.correlations])
    se = np.array([row["std_error"] for row in report.correlations])
    oracle = np.array([row["oracle"] for row in report.correlations])
    x = np.arange(len(labels))
    fig, ax = plt.subplots(figsize=(1.4 * len(labels) + 3, 4))
    ax.bar(x - 0.2, est, width=0.4, yerr=3 * se, capsize=3,
           label="simulated", color="tab:blue")
    ax.bar(x + 0.2, oracle, width=0.4, label="oracle", color="tab:orange")
    ax.axhline(0.0, color="black", linewidth=0.8)
    ax.set_xticks(x)
    ax.set_xticklabels(labels, rotation=30, ha="right")
    ax.set_ylabel("correlation")
    ax.set_title(report.kind)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def emit_figures(report, out_dir):
    """Render the figures the report supports; returns the written paths."""
    directory = Path(out_dir)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    if report.rows:
        paths.append(
            probability_figure(report, directory / "probabilities.png")
        )
    if report.correlations:
        paths.append(
            correlation_figure(report, directory / "correlations.png")
        )
    return paths
