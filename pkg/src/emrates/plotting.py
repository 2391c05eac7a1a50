"""Figure rendering for experiment results.

Used by the command-line report path; the study functions themselves
never import this module, so library consumers can stay headless.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_STYLE = {
    "figure.figsize": (7.0, 4.5),
    "figure.dpi": 120,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 10,
}


def _apply_style():
    for key, val in _STYLE.items():
        plt.rcParams[key] = val


def plot_log_error_trajectories(result, path) -> Path:
    """log10 error vs iteration, one line per replicate, colored by n."""
    _apply_style()
    path = Path(path)
    sizes = result.config.sample_sizes
    cmap = plt.get_cmap("viridis")
    colors = {n: cmap(i / max(1, len(sizes) - 1)) for i, n in enumerate(sizes)}
    fig, ax = plt.subplots()
    seen = set()
    for rec in result.records:
        errs = np.asarray(rec.errors)
        positive = errs > 0
        label = f"n={rec.n}" if rec.n not in seen else None
        seen.add(rec.n)
        ax.plot(
            np.arange(len(errs))[positive],
            np.log10(errs[positive]),
            color=colors[rec.n],
            alpha=0.6,
            linewidth=1.0,
            label=label,
        )
    ax.set_xlabel("iteration")
    ax.set_ylabel("log10 error")
    ax.set_title("EM error trajectories")
    if len(sizes) > 1:
        ax.legend()
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_rate_dispersion(result, path) -> Path:
    """std of the estimated optimal rate vs n, log-log."""
    _apply_style()
    path = Path(path)
    ns = [row.n for row in result.aggregates]
    stds = [row.std_k_bar for row in result.aggregates]
    fig, ax = plt.subplots()
    ax.loglog(ns, stds, "o-")
    ax.set_xlabel("n")
    ax.set_ylabel("std of estimated rate")
    title = "Rate dispersion vs sample size"
    if result.dispersion_slope is not None:
        title += f" (slope {result.dispersion_slope:.3f})"
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_error_scaling(result, path) -> Path:
    """mean final error vs n, log-log."""
    _apply_style()
    path = Path(path)
    ns = [row.n for row in result.aggregates]
    errs = [row.mean_final_error for row in result.aggregates]
    fig, ax = plt.subplots()
    ax.loglog(ns, errs, "o-")
    ax.set_xlabel("n")
    ax.set_ylabel("mean final error")
    title = "Final error vs sample size"
    if result.error_slope is not None:
        title += f" (slope {result.error_slope:.3f})"
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def render_experiment_figures(result, study: str, out_dir) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = [
        plot_log_error_trajectories(result, out_dir / "trajectories.png")
    ]
    if study == "stabilization":
        written.append(plot_rate_dispersion(result, out_dir / "dispersion.png"))
    if study == "consistency":
        written.append(plot_error_scaling(result, out_dir / "error_scaling.png"))
    return written
